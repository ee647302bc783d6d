#pragma once

#include <memory>
#include <vector>

#include "roiattn/config.hpp"
#include "roiattn/dataset.hpp"
#include "roiattn/head.hpp"
#include "roiattn/posenc.hpp"
#include "roiattn/proposals.hpp"
#include "roiattn/roi.hpp"

namespace roiattn {

struct ConvLayer {
    Tensor weight, bias;
    int stride = 1;
    int padding = 1;

    static ConvLayer init(int in_c, int out_c, int kernel, int stride, int padding, Rng& rng);
};

// Four conv+relu layers (4×4/s2 ×3, then 3×3/s1): one feature level at
// 1/8 of the input resolution. Even kernels keep the output extents
// exactly divisible at stride 2.
struct Backbone {
    std::vector<ConvLayer> layers;
    int out_channels = 0;

    static Backbone init(int out_channels, Rng& rng);
    Tensor forward(const Tensor& image) const;  // 3×H×W -> C×H/8×W/8
    void collect_params(std::vector<NamedParam>& out, const std::string& prefix) const;
};

// Intermediate tensors of one model forward, for structural checks (e.g.
// that the classification crop source is the raw feature map).
struct ForwardTrace {
    Tensor base_features;
    Tensor cls_source;
    Tensor reg_source;
};

constexpr int kRoiSize = 7;
constexpr int kFeatureStride = 8;

// The full toy detector: backbone, optional positional encoder on the
// regression features, dual-scale RoI extraction, and either the double
// head or the single-head baseline, wired per DetectionConfig.
class DetectionModel {
  public:
    static DetectionModel init(const DetectionConfig& cfg);

    HeadOutput forward(const Tensor& image, const std::vector<BoxXYXY>& proposals,
                       ForwardTrace* trace = nullptr) const;

    std::vector<NamedParam> parameters() const;
    const DetectionConfig& config() const { return cfg_; }

    // Loads parameter values by name (shapes must match the config).
    void load(const std::vector<NamedParam>& params);

  private:
    DetectionConfig cfg_;
    Backbone backbone_;
    PosEncoder posenc_;       // used iff cfg.use_pos_encoding
    DoubleHeadParams double_head_;
    SingleHeadParams single_head_;
    bool attention_enabled_ = false;
};

struct LossBreakdown {
    Tensor total;       // scalar
    float cls_term = 0.0f;
    float reg_term = 0.0f;
    int foreground = 0;
};

// Cross entropy over every proposal plus smooth-L1 over foreground deltas
// (summed over the 4 coordinates, averaged over foreground count); both
// terms weighted 1.
LossBreakdown detection_loss(const HeadOutput& out, const TrainingSample& sample);

}  // namespace roiattn
