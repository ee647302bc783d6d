#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "roiattn/roi.hpp"
#include "roiattn/tensor.hpp"

namespace roiattn {

constexpr int kImageSize = 128;
constexpr int kNumClasses = 4;  // disc, ring, rosette, ellipse
constexpr int kBackgroundClass = kNumClasses;

struct SceneObject {
    int cls = 0;
    BoxXYXY box;
};

// One synthetic training image: 1-6 shape instances over a textured noise
// background, with tight ground-truth boxes. Fully determined by the seed.
struct SyntheticScene {
    Tensor image;  // 3×128×128, values in [0, 1]
    std::vector<SceneObject> objects;
    uint64_t seed = 0;
};

SyntheticScene generate_scene(uint64_t seed);

// Binary PPM (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, const Tensor& image);

// One "class x1 y1 x2 y2" line per object.
void write_annotations(const std::filesystem::path& path,
                       const std::vector<SceneObject>& objects);

// scene_00000.ppm / scene_00000.txt pairs under dir.
void dump_scenes(const std::filesystem::path& dir, int count, uint64_t base_seed);

}  // namespace roiattn
