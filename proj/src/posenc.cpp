#include "roiattn/posenc.hpp"

#include "roiattn/ops.hpp"

namespace roiattn {

CoordMaps make_coord_maps(int h, int w) {
    if (h < 1 || w < 1) throw ConfigError("make_coord_maps: H and W must be >= 1");
    CoordMaps m;
    m.h = h;
    m.w = w;
    std::vector<float> cx(size_t(h) * w), cy(size_t(h) * w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            cx[size_t(r) * w + c] = float(c) / float(w);
            cy[size_t(r) * w + c] = float(r) / float(h);
        }
    }
    m.cx = Tensor::from_values({h, w}, std::move(cx));
    m.cy = Tensor::from_values({h, w}, std::move(cy));
    return m;
}

PosEncoder PosEncoder::init(int channels, Rng& rng) {
    if (channels < 1) throw ConfigError("PosEncoder: channels must be >= 1");
    PosEncoder e;
    e.channels = channels;
    const int in_c = channels + 2;
    std::vector<float> w(size_t(channels) * in_c, 0.0f);
    for (int o = 0; o < channels; ++o) {
        for (int i = 0; i < channels; ++i) {
            const float identity = o == i ? 1.0f : 0.0f;
            w[size_t(o) * in_c + i] = identity + float(rng.normal(0.0, 0.01));
        }
        // Coordinate channels (i = C, C+1) stay zero.
    }
    e.weight = Tensor::from_values({channels, in_c, 1, 1}, std::move(w), true);
    e.bias = Tensor::zeros({channels}, true);
    return e;
}

void PosEncoder::collect_params(std::vector<NamedParam>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

Tensor encode(const Tensor& x, const PosEncoder& enc) {
    if (x.rank() != 3) {
        throw ShapeError("encode: expected C×H×W features, got " + shape_str(x.shape()));
    }
    if (x.dim(0) != enc.channels) {
        throw ShapeError("encode: feature channels " + shape_str(x.shape()) +
                         " do not match encoder with " + std::to_string(enc.channels) +
                         " channels");
    }
    const int h = x.dim(1), w = x.dim(2);
    const CoordMaps maps = make_coord_maps(h, w);
    Tensor cx = reshape(maps.cx, {1, h, w});
    Tensor cy = reshape(maps.cy, {1, h, w});
    Tensor stacked = concat_channels({x, cx, cy});
    Tensor batched = reshape(stacked, {1, enc.channels + 2, h, w});
    Tensor fused = conv2d(batched, enc.weight, enc.bias, 1, 0);
    return reshape(fused, {enc.channels, h, w});
}

std::vector<Tensor> encode_levels(const std::vector<Tensor>& levels, const PosEncoder& enc) {
    std::vector<Tensor> out;
    out.reserve(levels.size());
    for (const Tensor& level : levels) out.push_back(encode(level, enc));
    return out;
}

}  // namespace roiattn
