#pragma once

#include <string>
#include <utility>
#include <vector>

#include "roiattn/tensor.hpp"

namespace roiattn {

// Axis-aligned box in image-pixel units, continuous coordinates,
// half-open [x1, x2) × [y1, y2).
struct BoxXYXY {
    float x1 = 0.0f, y1 = 0.0f, x2 = 0.0f, y2 = 0.0f;

    float width() const { return x2 - x1; }
    float height() const { return y2 - y1; }
    float area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0f; }
    bool valid() const { return x2 > x1 && y2 > y1; }
    std::string str() const;
};

// RoI pooling geometry: output resolution, the feature-map scale relative
// to image pixels (stride reciprocal), and bilinear samples per bin axis.
struct RoiGrid {
    int h = 7;
    int w = 7;
    float spatial_scale = 1.0f;
    int samples = 2;
};

// Scales a box about its center, then clips to [0, image_w] × [0, image_h].
// factor 1.0 is the identity for boxes already inside the image.
BoxXYXY scale_box(const BoxXYXY& b, float factor, float image_w, float image_h);

// Quantization-free crop-and-resize: each output bin averages bilinear
// samples taken at continuous coordinates with pixel-center alignment
// (value at coordinate u interpolates the pixel centers around u - 0.5,
// edge-clamped). Differentiable w.r.t. features.
// Throws ShapeError on a degenerate (zero-area) box, naming the box.
Tensor roi_align(const Tensor& features, const BoxXYXY& box, const RoiGrid& grid);

// All boxes against one feature map -> s×C×h×w.
Tensor roi_align_batch(const Tensor& features, const std::vector<BoxXYXY>& boxes,
                       const RoiGrid& grid);

// Classification RoIs from features_cls at factor 1, regression RoIs from
// features_reg at factor reg_scale (both clipped to the image extent
// implied by the grid's spatial scale).
std::pair<Tensor, Tensor> extract_dual(const Tensor& features_cls, const Tensor& features_reg,
                                       const std::vector<BoxXYXY>& boxes, const RoiGrid& grid,
                                       float reg_scale);

}  // namespace roiattn
