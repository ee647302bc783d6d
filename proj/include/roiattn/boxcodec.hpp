#pragma once

#include <array>
#include <vector>

#include "roiattn/roi.hpp"

namespace roiattn {

// Intersection over union; 0 for disjoint or degenerate boxes.
double box_iou(const BoxXYXY& a, const BoxXYXY& b);

// (dx, dy, dw, dh) = ((cx*-cx)/w, (cy*-cy)/h, ln(w*/w), ln(h*/h)).
std::array<float, 4> encode_box_delta(const BoxXYXY& proposal, const BoxXYXY& target);

// Inverse of encode_box_delta; exp arguments clamped to ±4 and the result
// clipped to the image.
BoxXYXY decode_box_delta(const BoxXYXY& proposal, const std::array<float, 4>& delta,
                         float image_w, float image_h);

// Greedy NMS: indices of kept boxes in descending score order (ties break
// toward the lower index).
std::vector<int> nms_greedy(const std::vector<BoxXYXY>& boxes,
                            const std::vector<float>& scores, double iou_thresh);

}  // namespace roiattn
