#include "roiattn/model.hpp"

#include <cmath>

#include "roiattn/checkpoint.hpp"
#include "roiattn/ops.hpp"

namespace roiattn {

ConvLayer ConvLayer::init(int in_c, int out_c, int kernel, int stride, int padding, Rng& rng) {
    ConvLayer l;
    const int fan_in = in_c * kernel * kernel;
    l.weight = Tensor::randn({out_c, in_c, kernel, kernel}, rng,
                             std::sqrt(2.0 / double(fan_in)), true);
    l.bias = Tensor::zeros({out_c}, true);
    l.stride = stride;
    l.padding = padding;
    return l;
}

Backbone Backbone::init(int out_channels, Rng& rng) {
    Backbone b;
    b.out_channels = out_channels;
    const int c1 = std::max(8, out_channels / 2);
    const int c2 = std::max(12, (out_channels * 2) / 3);
    // 4×4/s2/p1 halves an even extent exactly: (h + 2 - 4) / 2 + 1 = h/2.
    b.layers.push_back(ConvLayer::init(3, c1, 4, 2, 1, rng));
    b.layers.push_back(ConvLayer::init(c1, c2, 4, 2, 1, rng));
    b.layers.push_back(ConvLayer::init(c2, out_channels, 4, 2, 1, rng));
    b.layers.push_back(ConvLayer::init(out_channels, out_channels, 3, 1, 1, rng));
    return b;
}

Tensor Backbone::forward(const Tensor& image) const {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw ShapeError("backbone: expected 3×H×W image, got " + shape_str(image.shape()));
    }
    Tensor x = reshape(image, {1, 3, image.dim(1), image.dim(2)});
    // Center [0,1] pixels to roughly zero mean, unit order.
    x = scale(add(x, Tensor::full(x.shape(), -0.5f)), 2.0f);
    for (const ConvLayer& l : layers) {
        x = relu(conv2d(x, l.weight, l.bias, l.stride, l.padding));
    }
    return reshape(x, {x.dim(1), x.dim(2), x.dim(3)});
}

void Backbone::collect_params(std::vector<NamedParam>& out, const std::string& prefix) const {
    for (size_t i = 0; i < layers.size(); ++i) {
        out.push_back({prefix + ".conv" + std::to_string(i) + ".weight", layers[i].weight});
        out.push_back({prefix + ".conv" + std::to_string(i) + ".bias", layers[i].bias});
    }
}

DetectionModel DetectionModel::init(const DetectionConfig& cfg) {
    cfg.validate();
    DetectionModel m;
    m.cfg_ = cfg;
    Rng rng(mix_seed(cfg.seed, 0x6d6f64656cull));  // independent init stream

    m.backbone_ = Backbone::init(cfg.backbone_channels, rng);
    if (cfg.use_pos_encoding) m.posenc_ = PosEncoder::init(cfg.backbone_channels, rng);

    m.attention_enabled_ = cfg.attach_attention_cls || cfg.attach_attention_reg;
    const int attn_depth = m.attention_enabled_ ? cfg.depth : 0;

    if (cfg.use_double_head) {
        HeadWidths widths{cfg.fc_hidden, cfg.reg_mid, cfg.reg_expand};
        m.double_head_ = DoubleHeadParams::init(cfg.backbone_channels, kRoiSize, kRoiSize,
                                                kNumClasses, widths, cfg.d, attn_depth, rng);
        m.double_head_.attention_on_cls = cfg.attach_attention_cls;
        m.double_head_.attention_on_reg = cfg.attach_attention_reg;
    } else {
        m.single_head_ = SingleHeadParams::init(cfg.backbone_channels, kRoiSize, kRoiSize,
                                                kNumClasses, cfg.fc_hidden, rng);
        if (m.attention_enabled_ && cfg.depth > 0) {
            const int flat = cfg.backbone_channels * kRoiSize * kRoiSize;
            m.single_head_.attention = std::make_shared<RoiAttentionStack>(
                RoiAttentionStack::init(cfg.depth, cfg.d, flat, rng));
        }
    }
    return m;
}

HeadOutput DetectionModel::forward(const Tensor& image, const std::vector<BoxXYXY>& proposals,
                                   ForwardTrace* trace) const {
    Tensor base = backbone_.forward(image);
    Tensor cls_source = base;  // classification always reads the raw features
    Tensor reg_source = cfg_.use_pos_encoding ? encode(base, posenc_) : base;
    if (trace) {
        trace->base_features = base;
        trace->cls_source = cls_source;
        trace->reg_source = reg_source;
    }

    RoiGrid grid;
    grid.h = grid.w = kRoiSize;
    grid.spatial_scale = 1.0f / float(kFeatureStride);
    auto [cls_rois, reg_rois] = extract_dual(cls_source, reg_source, proposals, grid,
                                             cfg_.use_double_head ? cfg_.reg_scale : 1.0f);
    if (cfg_.use_double_head) {
        return head_forward(cls_rois, reg_rois, double_head_);
    }
    return single_head_forward(cls_rois, single_head_);
}

std::vector<NamedParam> DetectionModel::parameters() const {
    std::vector<NamedParam> out;
    backbone_.collect_params(out, "backbone");
    if (cfg_.use_pos_encoding) posenc_.collect_params(out, "posenc");
    if (cfg_.use_double_head) {
        double_head_.collect_params(out, "head");
    } else {
        single_head_.collect_params(out, "single_head");
    }
    return out;
}

void DetectionModel::load(const std::vector<NamedParam>& params) {
    std::vector<NamedParam> dest = parameters();
    apply_checkpoint(dest, params);
}

LossBreakdown detection_loss(const HeadOutput& out, const TrainingSample& sample) {
    if (out.class_logits.dim(0) != int(sample.labels.size())) {
        throw ShapeError("detection_loss: " + std::to_string(sample.labels.size()) +
                         " labels for logits " + shape_str(out.class_logits.shape()));
    }
    LossBreakdown lb;
    Tensor cls_loss = cross_entropy_with_logits(out.class_logits, sample.labels);
    lb.cls_term = cls_loss.data()[0];
    lb.foreground = int(sample.foreground.size());
    if (!sample.foreground.empty()) {
        std::vector<float> targets;
        targets.reserve(sample.foreground.size() * 4);
        for (int idx : sample.foreground) {
            const auto& d = sample.target_deltas[size_t(idx)];
            targets.insert(targets.end(), d.begin(), d.end());
        }
        Tensor fg_pred = select_rows(out.box_deltas, sample.foreground);
        Tensor fg_target = Tensor::from_values({int(sample.foreground.size()), 4},
                                               std::move(targets));
        Tensor reg_loss = smooth_l1(fg_pred, fg_target, 1.0f, float(sample.foreground.size()));
        lb.reg_term = reg_loss.data()[0];
        lb.total = add(cls_loss, reg_loss);
    } else {
        lb.total = cls_loss;
    }
    return lb;
}

}  // namespace roiattn
