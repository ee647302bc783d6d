#include "roiattn/roi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "roiattn/parallel.hpp"

namespace roiattn {

std::string BoxXYXY::str() const {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "(%.3f, %.3f, %.3f, %.3f)", x1, y1, x2, y2);
    return buf;
}

BoxXYXY scale_box(const BoxXYXY& b, float factor, float image_w, float image_h) {
    if (factor <= 0.0f) throw ConfigError("scale_box: factor must be positive");
    const double cx = 0.5 * (double(b.x1) + double(b.x2));
    const double cy = 0.5 * (double(b.y1) + double(b.y2));
    const double half_w = 0.5 * (double(b.x2) - double(b.x1)) * double(factor);
    const double half_h = 0.5 * (double(b.y2) - double(b.y1)) * double(factor);
    BoxXYXY out;
    out.x1 = float(std::clamp(cx - half_w, 0.0, double(image_w)));
    out.x2 = float(std::clamp(cx + half_w, 0.0, double(image_w)));
    out.y1 = float(std::clamp(cy - half_h, 0.0, double(image_h)));
    out.y2 = float(std::clamp(cy + half_h, 0.0, double(image_h)));
    return out;
}

namespace {

// One bilinear sample: 4 flat spatial indices and their weights.
struct SamplePoint {
    int idx[4];
    float w[4];
};

SamplePoint bilinear_point(double py, double px, int fh, int fw) {
    // Pixel-center alignment: coordinate u samples centers around u - 0.5.
    double uy = py - 0.5;
    double ux = px - 0.5;
    uy = std::clamp(uy, 0.0, double(fh - 1));
    ux = std::clamp(ux, 0.0, double(fw - 1));
    const int y0 = std::min(int(uy), fh - 1);
    const int x0 = std::min(int(ux), fw - 1);
    const int y1 = std::min(y0 + 1, fh - 1);
    const int x1 = std::min(x0 + 1, fw - 1);
    const float ty = float(uy - y0);
    const float tx = float(ux - x0);
    SamplePoint p;
    p.idx[0] = y0 * fw + x0;
    p.idx[1] = y0 * fw + x1;
    p.idx[2] = y1 * fw + x0;
    p.idx[3] = y1 * fw + x1;
    p.w[0] = (1.0f - ty) * (1.0f - tx);
    p.w[1] = (1.0f - ty) * tx;
    p.w[2] = ty * (1.0f - tx);
    p.w[3] = ty * tx;
    return p;
}

// All sample points for one box, bin-major then sample-major.
std::vector<SamplePoint> box_samples(const BoxXYXY& box, const RoiGrid& grid, int fh, int fw) {
    const double x1 = double(box.x1) * grid.spatial_scale;
    const double y1 = double(box.y1) * grid.spatial_scale;
    const double x2 = double(box.x2) * grid.spatial_scale;
    const double y2 = double(box.y2) * grid.spatial_scale;
    const double bin_h = (y2 - y1) / grid.h;
    const double bin_w = (x2 - x1) / grid.w;
    const int q = grid.samples;
    std::vector<SamplePoint> pts;
    pts.reserve(size_t(grid.h) * grid.w * q * q);
    for (int by = 0; by < grid.h; ++by) {
        for (int bx = 0; bx < grid.w; ++bx) {
            for (int qy = 0; qy < q; ++qy) {
                const double py = y1 + (by + (qy + 0.5) / q) * bin_h;
                for (int qx = 0; qx < q; ++qx) {
                    const double px = x1 + (bx + (qx + 0.5) / q) * bin_w;
                    pts.push_back(bilinear_point(py, px, fh, fw));
                }
            }
        }
    }
    return pts;
}

void validate_grid(const RoiGrid& grid) {
    if (grid.h < 1 || grid.w < 1) throw ConfigError("RoiGrid: output size must be >= 1");
    if (grid.samples < 1) throw ConfigError("RoiGrid: samples must be >= 1");
    if (grid.spatial_scale <= 0.0f) throw ConfigError("RoiGrid: spatial scale must be positive");
}

}  // namespace

Tensor roi_align_batch(const Tensor& features, const std::vector<BoxXYXY>& boxes,
                       const RoiGrid& grid) {
    if (features.rank() != 3) {
        throw ShapeError("roi_align: expected C×H×W features, got " + shape_str(features.shape()));
    }
    validate_grid(grid);
    const int c = features.dim(0), fh = features.dim(1), fw = features.dim(2);
    const int s = int(boxes.size());
    for (const BoxXYXY& b : boxes) {
        if (!b.valid()) {
            throw ShapeError("roi_align: degenerate box " + b.str());
        }
    }

    auto samples = std::make_shared<std::vector<std::vector<SamplePoint>>>(size_t(s));
    parallel_for(0, s, [&](int64_t bi) {
        (*samples)[size_t(bi)] = box_samples(boxes[size_t(bi)], grid, fh, fw);
    });

    const int q2 = grid.samples * grid.samples;
    const int64_t bins = int64_t(grid.h) * grid.w;
    const int64_t plane = int64_t(fh) * fw;
    Tensor out = Tensor::zeros({s, c, grid.h, grid.w});
    parallel_for(0, int64_t(s) * c, [&](int64_t sc) {
        const int64_t bi = sc / c;
        const int64_t ci = sc % c;
        const float* src = features.data() + ci * plane;
        float* dst = out.data() + sc * bins;
        const std::vector<SamplePoint>& pts = (*samples)[size_t(bi)];
        for (int64_t bin = 0; bin < bins; ++bin) {
            double acc = 0.0;
            const SamplePoint* p = pts.data() + bin * q2;
            for (int k = 0; k < q2; ++k) {
                acc += double(p[k].w[0]) * src[p[k].idx[0]] + double(p[k].w[1]) * src[p[k].idx[1]] +
                       double(p[k].w[2]) * src[p[k].idx[2]] + double(p[k].w[3]) * src[p[k].idx[3]];
            }
            dst[bin] = float(acc / q2);
        }
    });

    check_finite(out, "roi_align");
    if (Tape::current() && features.requires_grad()) {
        out.set_requires_grad(true);
        Tensor f = features;
        Tape::current()->record([f, out, samples, s, c, bins, plane, q2]() mutable {
            // Each channel's gradient plane is owned by one loop index, so
            // box-level scatter adds never collide across threads.
            const float* g = out.grad();
            parallel_for(0, c, [&](int64_t ci) {
                float* dst = f.grad() + ci * plane;
                for (int bi = 0; bi < s; ++bi) {
                    const std::vector<SamplePoint>& pts = (*samples)[size_t(bi)];
                    const float* gplane = g + (int64_t(bi) * c + ci) * bins;
                    for (int64_t bin = 0; bin < bins; ++bin) {
                        const float gv = gplane[bin] / float(q2);
                        const SamplePoint* p = pts.data() + bin * q2;
                        for (int k = 0; k < q2; ++k) {
                            dst[p[k].idx[0]] += p[k].w[0] * gv;
                            dst[p[k].idx[1]] += p[k].w[1] * gv;
                            dst[p[k].idx[2]] += p[k].w[2] * gv;
                            dst[p[k].idx[3]] += p[k].w[3] * gv;
                        }
                    }
                }
            });
        });
    }
    return out;
}

Tensor roi_align(const Tensor& features, const BoxXYXY& box, const RoiGrid& grid) {
    Tensor batch = roi_align_batch(features, {box}, grid);
    // Drop the leading singleton without touching the tape: reuse storage
    // via a reshape-like view is unnecessary here; a copy keeps ops uniform.
    Shape out_shape{batch.dim(1), batch.dim(2), batch.dim(3)};
    Tensor out = Tensor::from_values(out_shape, batch.values());
    if (Tape::current() && batch.requires_grad()) {
        out.set_requires_grad(true);
        Tape::current()->record([batch, out]() mutable {
            const float* g = out.grad();
            float* bg = batch.grad();
            const int64_t n = out.numel();
            for (int64_t i = 0; i < n; ++i) bg[i] += g[i];
        });
    }
    return out;
}

std::pair<Tensor, Tensor> extract_dual(const Tensor& features_cls, const Tensor& features_reg,
                                       const std::vector<BoxXYXY>& boxes, const RoiGrid& grid,
                                       float reg_scale) {
    if (features_cls.rank() != 3 || features_reg.rank() != 3 ||
        features_cls.shape() != features_reg.shape()) {
        throw ShapeError("extract_dual: branch feature maps differ, " +
                         shape_str(features_cls.shape()) + " vs " +
                         shape_str(features_reg.shape()));
    }
    validate_grid(grid);
    // Clip bounds in image pixels implied by the feature extent and scale.
    const float image_w = float(features_cls.dim(2)) / grid.spatial_scale;
    const float image_h = float(features_cls.dim(1)) / grid.spatial_scale;
    std::vector<BoxXYXY> cls_boxes, reg_boxes;
    cls_boxes.reserve(boxes.size());
    reg_boxes.reserve(boxes.size());
    for (const BoxXYXY& b : boxes) {
        cls_boxes.push_back(scale_box(b, 1.0f, image_w, image_h));
        reg_boxes.push_back(scale_box(b, reg_scale, image_w, image_h));
    }
    Tensor cls = roi_align_batch(features_cls, cls_boxes, grid);
    Tensor reg = roi_align_batch(features_reg, reg_boxes, grid);
    return {cls, reg};
}

}  // namespace roiattn
