#pragma once

#include <string>
#include <vector>

#include "roiattn/train.hpp"

namespace roiattn {

// d × depth sweep over the attention block (single head + attention, no
// positional encoding), one short training per cell on fixed seeds.
struct AblationCell {
    int d = 0;
    int depth = 0;
    double ap = 0.0;
    double ap50 = 0.0;
    double ap75 = 0.0;
    double reference_ap = 0.0;  // published AP for the same cell
};

std::vector<int> ablation_d_values();      // {10, 20, 40, 80}
std::vector<int> ablation_depth_values();  // {1, 2, 3}

// Published AP for a (d, depth) cell of the sweep.
double reference_grid_ap(int d, int depth);

std::vector<AblationCell> run_grid_ablation(const DetectionConfig& base, bool verbose = false);

// CSV: d,depth,AP,AP50,AP75,paper_AP (header included).
std::string ablation_csv(const std::vector<AblationCell>& cells);
std::string ablation_markdown(const std::vector<AblationCell>& cells);

// Head-structure sweep: baseline, +attention, double head with attention
// on both branches, and full (both + positional encoding), each averaged
// over the given seeds.
struct HeadAblationRow {
    std::string name;
    std::vector<double> ap_per_seed;
    double mean_ap = 0.0;
    double mean_ap50 = 0.0;
};

struct HeadAblationReport {
    std::vector<HeadAblationRow> rows;
    bool attention_inversion = false;  // baseline > +attention on mean AP
    bool full_inversion = false;       // both > full on mean AP
};

HeadAblationReport run_head_ablation(const DetectionConfig& base,
                                     const std::vector<uint64_t>& seeds,
                                     bool verbose = false);

std::string head_ablation_text(const HeadAblationReport& report);

}  // namespace roiattn
