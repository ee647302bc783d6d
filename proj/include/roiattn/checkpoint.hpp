#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "roiattn/tensor.hpp"

namespace roiattn {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

// Binary checkpoint, little-endian:
//   magic "RATN1\n", then per parameter:
//   u32 name length, UTF-8 name, u32 rank, u32 extents..., float32 payload.
void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedParam>& params);

// Reads every parameter record; throws CheckpointError on unknown magic or
// a truncated file.
std::vector<NamedParam> load_checkpoint(const std::filesystem::path& path);

// Copies loaded values into matching destination parameters by name.
// Throws CheckpointError on a missing name or a shape mismatch.
void apply_checkpoint(std::vector<NamedParam>& dest, const std::vector<NamedParam>& loaded);

}  // namespace roiattn
