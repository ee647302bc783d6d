#pragma once

#include <string>
#include <vector>

#include "roiattn/checkpoint.hpp"
#include "roiattn/tensor.hpp"

namespace roiattn {

// Normalized coordinate maps: cx[row, col] = col / W, cy[row, col] = row / H.
// Values lie in [0, 1); cx is constant down each column, cy along each row.
struct CoordMaps {
    Tensor cx;  // H×W
    Tensor cy;  // H×W
    int h = 0;
    int w = 0;
};

CoordMaps make_coord_maps(int h, int w);

// Fuses explicit position into features for the regression branch:
// concat(X, Cx, Cy) -> 1×1 conv back down to C channels. One parameter set
// is shared across all feature levels.
struct PosEncoder {
    Tensor weight;  // C × (C+2) × 1 × 1
    Tensor bias;    // C
    int channels = 0;

    // Starts as a near-identity on the feature channels with zero weight on
    // the coordinate channels, so encoding begins as a no-op and is learned.
    static PosEncoder init(int channels, Rng& rng);

    void collect_params(std::vector<NamedParam>& out, const std::string& prefix) const;
};

// x is C×H×W; output has identical shape.
Tensor encode(const Tensor& x, const PosEncoder& enc);

// Applies encode per level with freshly sized coordinate maps.
std::vector<Tensor> encode_levels(const std::vector<Tensor>& levels, const PosEncoder& enc);

}  // namespace roiattn
