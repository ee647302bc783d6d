#include "roiattn/ablation.hpp"

#include <cstdio>

namespace roiattn {

std::vector<int> ablation_d_values() { return {10, 20, 40, 80}; }
std::vector<int> ablation_depth_values() { return {1, 2, 3}; }

double reference_grid_ap(int d, int depth) {
    struct Entry {
        int d, depth;
        double ap;
    };
    static const Entry table[] = {
        {10, 1, 45.4}, {20, 1, 45.1}, {40, 1, 45.1}, {80, 1, 45.0},
        {10, 2, 44.9}, {20, 2, 45.3}, {40, 2, 45.0}, {80, 2, 45.2},
        {10, 3, 45.1}, {20, 3, 45.0}, {40, 3, 44.9}, {80, 3, 45.1},
    };
    for (const Entry& e : table) {
        if (e.d == d && e.depth == depth) return e.ap;
    }
    throw ConfigError("no reference AP for d=" + std::to_string(d) +
                      " depth=" + std::to_string(depth));
}

std::vector<AblationCell> run_grid_ablation(const DetectionConfig& base, bool verbose) {
    std::vector<AblationCell> cells;
    for (int d : ablation_d_values()) {
        for (int depth : ablation_depth_values()) {
            DetectionConfig cfg = base;
            cfg.d = d;
            cfg.depth = depth;
            // The sweep isolates the attention block: single head with
            // attention attached, no positional encoding.
            cfg.use_double_head = false;
            cfg.use_pos_encoding = false;
            cfg.attach_attention_cls = true;
            cfg.attach_attention_reg = true;
            TrainResult r = train(cfg);
            AblationCell cell{d, depth, r.final_eval.ap, r.final_eval.ap50, r.final_eval.ap75,
                              reference_grid_ap(d, depth)};
            cells.push_back(cell);
            if (verbose) {
                std::fprintf(stderr, "grid d=%d depth=%d: AP %.4f AP50 %.4f\n", d, depth,
                             cell.ap, cell.ap50);
            }
        }
    }
    return cells;
}

std::string ablation_csv(const std::vector<AblationCell>& cells) {
    std::string out = "d,depth,AP,AP50,AP75,paper_AP\n";
    char line[160];
    for (const AblationCell& c : cells) {
        std::snprintf(line, sizeof(line), "%d,%d,%.6f,%.6f,%.6f,%.1f\n", c.d, c.depth, c.ap,
                      c.ap50, c.ap75, c.reference_ap);
        out += line;
    }
    return out;
}

std::string ablation_markdown(const std::vector<AblationCell>& cells) {
    std::string out = "| d | depth | AP | AP50 | AP75 | paper_AP |\n";
    out += "|---|-------|----|------|------|----------|\n";
    char line[192];
    for (const AblationCell& c : cells) {
        std::snprintf(line, sizeof(line), "| %d | %d | %.4f | %.4f | %.4f | %.1f |\n", c.d,
                      c.depth, c.ap, c.ap50, c.ap75, c.reference_ap);
        out += line;
    }
    return out;
}

HeadAblationReport run_head_ablation(const DetectionConfig& base,
                                     const std::vector<uint64_t>& seeds, bool verbose) {
    struct Variant {
        const char* name;
        bool double_head, posenc, attn_cls, attn_reg;
    };
    const Variant variants[] = {
        {"baseline", false, false, false, false},
        {"+attention", false, false, true, true},
        {"both", true, false, true, true},
        {"full", true, true, true, true},
    };

    HeadAblationReport report;
    for (const Variant& v : variants) {
        HeadAblationRow row;
        row.name = v.name;
        double sum_ap = 0.0, sum_ap50 = 0.0;
        for (uint64_t seed : seeds) {
            DetectionConfig cfg = base;
            cfg.use_double_head = v.double_head;
            cfg.use_pos_encoding = v.posenc;
            cfg.attach_attention_cls = v.attn_cls;
            cfg.attach_attention_reg = v.attn_reg;
            cfg.seed = seed;
            TrainResult r = train(cfg);
            row.ap_per_seed.push_back(r.final_eval.ap);
            sum_ap += r.final_eval.ap;
            sum_ap50 += r.final_eval.ap50;
            if (verbose) {
                std::fprintf(stderr, "head ablation %s seed %llu: AP %.4f\n", v.name,
                             static_cast<unsigned long long>(seed), r.final_eval.ap);
            }
        }
        row.mean_ap = sum_ap / double(seeds.size());
        row.mean_ap50 = sum_ap50 / double(seeds.size());
        report.rows.push_back(std::move(row));
    }
    report.attention_inversion = report.rows[0].mean_ap > report.rows[1].mean_ap;
    report.full_inversion = report.rows[2].mean_ap > report.rows[3].mean_ap;
    return report;
}

std::string head_ablation_text(const HeadAblationReport& report) {
    std::string out = "variant,mean_AP,mean_AP50,per_seed_AP\n";
    char line[256];
    for (const HeadAblationRow& r : report.rows) {
        std::string seeds;
        for (size_t i = 0; i < r.ap_per_seed.size(); ++i) {
            char b[32];
            std::snprintf(b, sizeof(b), "%s%.4f", i ? " " : "", r.ap_per_seed[i]);
            seeds += b;
        }
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%s\n", r.name.c_str(), r.mean_ap,
                      r.mean_ap50, seeds.c_str());
        out += line;
    }
    if (report.attention_inversion) {
        out += "# INVERSION: baseline mean AP exceeds +attention\n";
    }
    if (report.full_inversion) {
        out += "# INVERSION: both mean AP exceeds full\n";
    }
    return out;
}

}  // namespace roiattn
