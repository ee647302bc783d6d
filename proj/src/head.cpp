#include "roiattn/head.hpp"

#include <cmath>

#include "roiattn/ops.hpp"

namespace roiattn {

namespace {

Tensor he_weights(Shape shape, int fan_in, Rng& rng) {
    return Tensor::randn(std::move(shape), rng, std::sqrt(2.0 / double(fan_in)), true);
}

}  // namespace

BottleneckBlock BottleneckBlock::init(int in_channels, int mid, int expand, Rng& rng) {
    BottleneckBlock b;
    b.conv3_weight = he_weights({mid, in_channels, 3, 3}, in_channels * 9, rng);
    b.conv3_bias = Tensor::zeros({mid}, true);
    b.conv1_weight = he_weights({expand, mid, 1, 1}, mid, rng);
    b.conv1_bias = Tensor::zeros({expand}, true);
    b.id_weight = he_weights({expand, in_channels, 1, 1}, in_channels, rng);
    b.id_bias = Tensor::zeros({expand}, true);
    return b;
}

Tensor BottleneckBlock::forward(const Tensor& x) const {
    Tensor path = relu(conv2d(x, conv3_weight, conv3_bias, 1, 1));
    path = conv2d(path, conv1_weight, conv1_bias, 1, 0);
    Tensor identity = conv2d(x, id_weight, id_bias, 1, 0);
    return relu(add(path, identity));
}

void BottleneckBlock::collect_params(std::vector<NamedParam>& out,
                                     const std::string& prefix) const {
    out.push_back({prefix + ".conv3x3.weight", conv3_weight});
    out.push_back({prefix + ".conv3x3.bias", conv3_bias});
    out.push_back({prefix + ".conv1x1.weight", conv1_weight});
    out.push_back({prefix + ".conv1x1.bias", conv1_bias});
    out.push_back({prefix + ".identity.weight", id_weight});
    out.push_back({prefix + ".identity.bias", id_bias});
}

DoubleHeadParams DoubleHeadParams::init(int in_channels, int roi_h, int roi_w, int num_classes,
                                        const HeadWidths& widths, int attn_d, int attn_depth,
                                        Rng& rng) {
    if (num_classes < 1) throw ConfigError("DoubleHeadParams: need at least one class");
    DoubleHeadParams p;
    p.in_channels = in_channels;
    p.roi_h = roi_h;
    p.roi_w = roi_w;
    p.num_classes = num_classes;
    p.widths = widths;

    const int flat = in_channels * roi_h * roi_w;
    p.shared_attention = std::make_shared<RoiAttentionStack>(
        RoiAttentionStack::init(attn_depth, attn_d, flat, rng));

    p.cls_fc1_weight = he_weights({flat, widths.fc_hidden}, flat, rng);
    p.cls_fc1_bias = Tensor::zeros({widths.fc_hidden}, true);
    p.cls_fc2_weight = Tensor::randn({widths.fc_hidden, num_classes + 1}, rng, 0.01, true);
    p.cls_fc2_bias = Tensor::zeros({num_classes + 1}, true);

    p.reg_blocks.push_back(BottleneckBlock::init(in_channels, widths.reg_mid,
                                                 widths.reg_expand, rng));
    p.reg_blocks.push_back(BottleneckBlock::init(widths.reg_expand, widths.reg_mid,
                                                 widths.reg_expand, rng));

    p.reg_out_weight = Tensor::randn({widths.reg_expand, 4}, rng, 0.001, true);
    p.reg_out_bias = Tensor::zeros({4}, true);
    return p;
}

void DoubleHeadParams::collect_params(std::vector<NamedParam>& out,
                                      const std::string& prefix) const {
    if (shared_attention) shared_attention->collect_params(out, prefix + ".attention");
    out.push_back({prefix + ".cls_fc1.weight", cls_fc1_weight});
    out.push_back({prefix + ".cls_fc1.bias", cls_fc1_bias});
    out.push_back({prefix + ".cls_fc2.weight", cls_fc2_weight});
    out.push_back({prefix + ".cls_fc2.bias", cls_fc2_bias});
    for (size_t i = 0; i < reg_blocks.size(); ++i) {
        reg_blocks[i].collect_params(out, prefix + ".reg_block" + std::to_string(i));
    }
    out.push_back({prefix + ".reg_out.weight", reg_out_weight});
    out.push_back({prefix + ".reg_out.bias", reg_out_bias});
}

namespace {

void require_roi_shape(const Tensor& rois, int c, int h, int w, const char* op) {
    if (rois.rank() != 4 || rois.dim(1) != c || rois.dim(2) != h || rois.dim(3) != w) {
        throw ShapeError(std::string(op) + ": RoI stack " + shape_str(rois.shape()) +
                         " does not match head built for [s, " + std::to_string(c) + ", " +
                         std::to_string(h) + ", " + std::to_string(w) + "]");
    }
}

}  // namespace

Tensor forward_cls(const Tensor& rois, const DoubleHeadParams& p) {
    require_roi_shape(rois, p.in_channels, p.roi_h, p.roi_w, "forward_cls");
    Tensor x = rois;
    if (p.attention_on_cls && p.shared_attention) x = stack_forward(x, *p.shared_attention);
    Tensor flat = flatten2d(x);
    Tensor hidden = relu(linear(flat, p.cls_fc1_weight, p.cls_fc1_bias));
    return linear(hidden, p.cls_fc2_weight, p.cls_fc2_bias);
}

Tensor forward_reg(const Tensor& rois, const DoubleHeadParams& p) {
    require_roi_shape(rois, p.in_channels, p.roi_h, p.roi_w, "forward_reg");
    Tensor x = rois;
    if (p.attention_on_reg && p.shared_attention) x = stack_forward(x, *p.shared_attention);
    for (const BottleneckBlock& block : p.reg_blocks) x = block.forward(x);
    Tensor pooled = avg_pool_global(x);
    return linear(pooled, p.reg_out_weight, p.reg_out_bias);
}

HeadOutput head_forward(const Tensor& cls_rois, const Tensor& reg_rois,
                        const DoubleHeadParams& p) {
    if (cls_rois.dim(0) != reg_rois.dim(0)) {
        throw ShapeError("head_forward: RoI counts differ, " + shape_str(cls_rois.shape()) +
                         " vs " + shape_str(reg_rois.shape()));
    }
    return {forward_cls(cls_rois, p), forward_reg(reg_rois, p)};
}

SingleHeadParams SingleHeadParams::init(int in_channels, int roi_h, int roi_w, int num_classes,
                                        int fc_hidden, Rng& rng) {
    SingleHeadParams p;
    p.in_channels = in_channels;
    p.roi_h = roi_h;
    p.roi_w = roi_w;
    p.num_classes = num_classes;
    p.fc_hidden = fc_hidden;
    const int flat = in_channels * roi_h * roi_w;
    p.fc1_weight = he_weights({flat, fc_hidden}, flat, rng);
    p.fc1_bias = Tensor::zeros({fc_hidden}, true);
    p.fc2_weight = he_weights({fc_hidden, fc_hidden}, fc_hidden, rng);
    p.fc2_bias = Tensor::zeros({fc_hidden}, true);
    p.cls_out_weight = Tensor::randn({fc_hidden, num_classes + 1}, rng, 0.01, true);
    p.cls_out_bias = Tensor::zeros({num_classes + 1}, true);
    p.reg_out_weight = Tensor::randn({fc_hidden, 4}, rng, 0.001, true);
    p.reg_out_bias = Tensor::zeros({4}, true);
    return p;
}

void SingleHeadParams::collect_params(std::vector<NamedParam>& out,
                                      const std::string& prefix) const {
    if (attention) attention->collect_params(out, prefix + ".attention");
    out.push_back({prefix + ".fc1.weight", fc1_weight});
    out.push_back({prefix + ".fc1.bias", fc1_bias});
    out.push_back({prefix + ".fc2.weight", fc2_weight});
    out.push_back({prefix + ".fc2.bias", fc2_bias});
    out.push_back({prefix + ".cls_out.weight", cls_out_weight});
    out.push_back({prefix + ".cls_out.bias", cls_out_bias});
    out.push_back({prefix + ".reg_out.weight", reg_out_weight});
    out.push_back({prefix + ".reg_out.bias", reg_out_bias});
}

HeadOutput single_head_forward(const Tensor& rois, const SingleHeadParams& p) {
    require_roi_shape(rois, p.in_channels, p.roi_h, p.roi_w, "single_head_forward");
    Tensor x = rois;
    if (p.attention) x = stack_forward(x, *p.attention);
    Tensor flat = flatten2d(x);
    Tensor hidden = relu(linear(flat, p.fc1_weight, p.fc1_bias));
    hidden = relu(linear(hidden, p.fc2_weight, p.fc2_bias));
    return {linear(hidden, p.cls_out_weight, p.cls_out_bias),
            linear(hidden, p.reg_out_weight, p.reg_out_bias)};
}

}  // namespace roiattn
