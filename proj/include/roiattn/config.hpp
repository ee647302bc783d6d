#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "roiattn/common.hpp"

namespace roiattn {

// Every field maps 1:1 to a config-file key and a CLI flag. The layer
// widths default to a CPU-scale plan; the reference plan (256-channel
// features, 3×3×256 / 1×1×1024 regression blocks, 1024-wide fc) is a
// valid configuration but trains far too slowly on desktop CPUs.
struct DetectionConfig {
    int d = 10;
    int depth = 1;
    float reg_scale = 1.3f;
    bool use_double_head = true;
    bool use_pos_encoding = true;
    bool attach_attention_cls = true;
    bool attach_attention_reg = true;
    float lr = 0.005f;
    float momentum = 0.9f;
    float weight_decay = 1e-4f;
    int epochs = 12;
    std::vector<int> lr_decay_epochs{8, 11};
    uint64_t seed = 42;
    int train_scenes = 512;
    int val_scenes = 128;
    int backbone_channels = 24;
    int fc_hidden = 128;
    int reg_mid = 32;
    int reg_expand = 64;

    // Throws ConfigError on out-of-range values or invalid combinations
    // (positional encoding requires the double head).
    void validate() const;
};

// Flat "key = value" text; '#' starts a comment, blank lines are skipped.
// Unknown keys or malformed lines throw ConfigError quoting the line.
DetectionConfig parse_config_text(const std::string& text);
DetectionConfig parse_config_file(const std::filesystem::path& path);

// Inverse of the parser, one key per line, diff-friendly.
std::string config_to_text(const DetectionConfig& cfg);

}  // namespace roiattn
