#pragma once

#include <vector>

#include "roiattn/roi.hpp"

namespace roiattn {

struct Detection {
    int image_id = 0;
    int cls = 0;
    float score = 0.0f;
    BoxXYXY box;
};

struct GtBox {
    int image_id = 0;
    int cls = 0;
    BoxXYXY box;
};

struct ApReport {
    double ap = 0.0;    // mean over classes and thresholds
    double ap50 = 0.0;  // mean over classes at IoU 0.5
    double ap75 = 0.0;
    // Per class: mean over thresholds, -1 when a class has no ground truth
    // (such classes are excluded from all means).
    std::vector<double> per_class_ap;
};

// IoU 0.50:0.05:0.95.
std::vector<double> coco_thresholds();

// Per class and threshold: detections in descending score order greedily
// match the unmatched ground truth of highest IoU (>= threshold) in their
// image. AP is the 101-point interpolated area under precision-recall.
// Ties in score break by (image_id, insertion order), so the result is a
// pure function of its inputs.
ApReport evaluate_map(const std::vector<Detection>& detections,
                      const std::vector<GtBox>& ground_truth,
                      const std::vector<double>& thresholds, int num_classes);

}  // namespace roiattn
