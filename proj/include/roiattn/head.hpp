#pragma once

#include <memory>
#include <string>
#include <vector>

#include "roiattn/attention.hpp"
#include "roiattn/checkpoint.hpp"
#include "roiattn/tensor.hpp"

namespace roiattn {

// Layer widths for the two head branches. reference() gives the published
// plan: fc hidden 1024, regression blocks 3×3×256 -> 1×1×1024 with a
// 1×1×1024 identity projection. Narrower plans keep the same structure
// for CPU-scale training.
struct HeadWidths {
    int fc_hidden = 1024;
    int reg_mid = 256;
    int reg_expand = 1024;

    static HeadWidths reference() { return HeadWidths{1024, 256, 1024}; }
};

// One residual bottleneck: conv path 3×3 (mid channels) -> relu -> 1×1
// (expand channels), identity path 1×1 (expand channels), relu after the
// residual add.
struct BottleneckBlock {
    Tensor conv3_weight, conv3_bias;  // mid × in × 3 × 3
    Tensor conv1_weight, conv1_bias;  // expand × mid × 1 × 1
    Tensor id_weight, id_bias;        // expand × in × 1 × 1

    static BottleneckBlock init(int in_channels, int mid, int expand, Rng& rng);
    Tensor forward(const Tensor& x) const;
    void collect_params(std::vector<NamedParam>& out, const std::string& prefix) const;
};

struct HeadOutput {
    Tensor class_logits;  // s × (num_classes+1)
    Tensor box_deltas;    // s × 4, class-agnostic (dx, dy, dw, dh)
};

// Two-branch head: fully connected classification, convolutional
// regression, one attention stack shared by both branches (the same
// parameter object, not a copy).
struct DoubleHeadParams {
    std::shared_ptr<RoiAttentionStack> shared_attention;
    bool attention_on_cls = true;
    bool attention_on_reg = true;

    Tensor cls_fc1_weight, cls_fc1_bias;
    Tensor cls_fc2_weight, cls_fc2_bias;
    std::vector<BottleneckBlock> reg_blocks;  // 2 blocks = 4 conv layers
    Tensor reg_out_weight, reg_out_bias;

    int in_channels = 0;
    int roi_h = 0, roi_w = 0;
    int num_classes = 0;
    HeadWidths widths;

    static DoubleHeadParams init(int in_channels, int roi_h, int roi_w, int num_classes,
                                 const HeadWidths& widths, int attn_d, int attn_depth,
                                 Rng& rng);

    void collect_params(std::vector<NamedParam>& out, const std::string& prefix) const;
};

// stack_forward -> flatten -> linear -> relu -> linear.
Tensor forward_cls(const Tensor& rois, const DoubleHeadParams& p);

// stack_forward (shared params) -> bottlenecks -> global average pool ->
// linear, 4 deltas per RoI.
Tensor forward_reg(const Tensor& rois, const DoubleHeadParams& p);

// Pairs the two branches; both inputs must hold the same number of RoIs.
HeadOutput head_forward(const Tensor& cls_rois, const Tensor& reg_rois,
                        const DoubleHeadParams& p);

// Baseline single head: shared fc trunk with separate classification and
// regression outputs, optional attention stack in front.
struct SingleHeadParams {
    std::shared_ptr<RoiAttentionStack> attention;  // may be null
    Tensor fc1_weight, fc1_bias;
    Tensor fc2_weight, fc2_bias;
    Tensor cls_out_weight, cls_out_bias;
    Tensor reg_out_weight, reg_out_bias;

    int in_channels = 0;
    int roi_h = 0, roi_w = 0;
    int num_classes = 0;
    int fc_hidden = 0;

    static SingleHeadParams init(int in_channels, int roi_h, int roi_w, int num_classes,
                                 int fc_hidden, Rng& rng);

    void collect_params(std::vector<NamedParam>& out, const std::string& prefix) const;
};

HeadOutput single_head_forward(const Tensor& rois, const SingleHeadParams& p);

}  // namespace roiattn
