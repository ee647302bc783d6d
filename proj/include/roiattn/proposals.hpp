#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "roiattn/dataset.hpp"
#include "roiattn/roi.hpp"

namespace roiattn {

// Proposal generation stands in for a region proposal network: each ground
// truth box is jittered into a fixed number of positives, plus random
// distractor boxes that the assignment step labels by overlap.
struct ProposalConfig {
    int positives_per_gt = 8;
    int negatives = 24;
    float center_jitter = 0.15f;  // fraction of box width/height
    float scale_lo = 0.8f;
    float scale_hi = 1.25f;
};

std::vector<BoxXYXY> make_proposals(const SyntheticScene& scene, uint64_t seed,
                                    const ProposalConfig& cfg = {});

struct TrainingSample {
    std::vector<BoxXYXY> proposals;
    std::vector<int> labels;  // class index, or kBackgroundClass
    // Regression targets, defined only at foreground rows.
    std::vector<std::array<float, 4>> target_deltas;
    std::vector<int> foreground;  // indices with labels[i] != background
};

// Max-IoU assignment at the given foreground threshold, with box-delta
// encoding against each matched ground truth.
TrainingSample assign_and_encode(const std::vector<BoxXYXY>& proposals,
                                 const std::vector<SceneObject>& ground_truth,
                                 float fg_iou = 0.5f);

}  // namespace roiattn
