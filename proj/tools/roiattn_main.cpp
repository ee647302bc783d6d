// Command-line front end: train / eval / ablate / bench / selftest /
// dump-scenes. Exit codes: 0 success, 1 runtime failure, 2 bad usage or
// malformed config, 3 missing checkpoint.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "acceptance/criteria.hpp"
#include "roiattn/ablation.hpp"
#include "roiattn/attention.hpp"
#include "roiattn/checkpoint.hpp"
#include "roiattn/config.hpp"
#include "roiattn/train.hpp"

namespace {

using namespace roiattn;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitMissingCheckpoint = 3;

// Every DetectionConfig key doubles as a flag; flags override file keys.
struct ConfigFlags {
    std::optional<int> d, depth, epochs, train_scenes, val_scenes;
    std::optional<int> backbone_channels, fc_hidden, reg_mid, reg_expand;
    std::optional<float> reg_scale, lr, momentum, weight_decay;
    std::optional<bool> use_double_head, use_pos_encoding;
    std::optional<bool> attach_attention_cls, attach_attention_reg;
    std::optional<uint64_t> seed;
    std::optional<std::string> lr_decay_epochs;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
    const DetectionConfig def;
    auto opt = [&](const char* name, auto& slot, const std::string& help) {
        cmd->add_option(name, slot, help);
    };
    opt("--d", f.d, "attention memory dimension (default " + std::to_string(def.d) + ")");
    opt("--depth", f.depth, "attention stack depth (default " + std::to_string(def.depth) + ")");
    opt("--reg-scale", f.reg_scale, "regression crop scale factor (default 1.3)");
    opt("--use-double-head", f.use_double_head, "two-branch head (default true)");
    opt("--use-pos-encoding", f.use_pos_encoding,
        "coordinate encoding on regression features (default true)");
    opt("--attach-attention-cls", f.attach_attention_cls,
        "attention on the classification branch (default true)");
    opt("--attach-attention-reg", f.attach_attention_reg,
        "attention on the regression branch (default true)");
    opt("--lr", f.lr, "initial learning rate (default 0.005)");
    opt("--momentum", f.momentum, "SGD momentum (default 0.9)");
    opt("--weight-decay", f.weight_decay, "SGD weight decay (default 0.0001)");
    opt("--epochs", f.epochs, "training epochs (default " + std::to_string(def.epochs) + ")");
    opt("--lr-decay-epochs", f.lr_decay_epochs,
        "comma-separated epochs after which lr decays 10x (default 8,11)");
    opt("--seed", f.seed, "master seed (default 42)");
    opt("--train-scenes", f.train_scenes,
        "training scenes per epoch (default " + std::to_string(def.train_scenes) + ")");
    opt("--val-scenes", f.val_scenes,
        "held-out scenes (default " + std::to_string(def.val_scenes) + ")");
    opt("--backbone-channels", f.backbone_channels,
        "feature channels (default " + std::to_string(def.backbone_channels) + ")");
    opt("--fc-hidden", f.fc_hidden,
        "classification fc width (default " + std::to_string(def.fc_hidden) + ")");
    opt("--reg-mid", f.reg_mid,
        "regression 3x3 conv channels (default " + std::to_string(def.reg_mid) + ")");
    opt("--reg-expand", f.reg_expand,
        "regression 1x1 conv channels (default " + std::to_string(def.reg_expand) + ")");
}

DetectionConfig resolve_config(const std::optional<std::string>& config_path,
                               const ConfigFlags& f) {
    DetectionConfig cfg;
    if (config_path) cfg = parse_config_file(*config_path);
    if (f.d) cfg.d = *f.d;
    if (f.depth) cfg.depth = *f.depth;
    if (f.reg_scale) cfg.reg_scale = *f.reg_scale;
    if (f.use_double_head) cfg.use_double_head = *f.use_double_head;
    if (f.use_pos_encoding) cfg.use_pos_encoding = *f.use_pos_encoding;
    if (f.attach_attention_cls) cfg.attach_attention_cls = *f.attach_attention_cls;
    if (f.attach_attention_reg) cfg.attach_attention_reg = *f.attach_attention_reg;
    if (f.lr) cfg.lr = *f.lr;
    if (f.momentum) cfg.momentum = *f.momentum;
    if (f.weight_decay) cfg.weight_decay = *f.weight_decay;
    if (f.epochs) cfg.epochs = *f.epochs;
    if (f.seed) cfg.seed = *f.seed;
    if (f.train_scenes) cfg.train_scenes = *f.train_scenes;
    if (f.val_scenes) cfg.val_scenes = *f.val_scenes;
    if (f.backbone_channels) cfg.backbone_channels = *f.backbone_channels;
    if (f.fc_hidden) cfg.fc_hidden = *f.fc_hidden;
    if (f.reg_mid) cfg.reg_mid = *f.reg_mid;
    if (f.reg_expand) cfg.reg_expand = *f.reg_expand;
    if (f.lr_decay_epochs) {
        // Reuse the config parser for the list syntax.
        cfg.lr_decay_epochs = parse_config_text("lr_decay_epochs = " + *f.lr_decay_epochs)
                                  .lr_decay_epochs;
    }
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"roiattn: external-attention RoI detection head on a synthetic dataset"};
    app.require_subcommand(1);

    // train ------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "train a detector and write checkpoint/metrics");
    std::optional<std::string> train_config;
    std::string train_out = "out";
    std::optional<std::string> train_dump;
    bool train_quiet = false;
    ConfigFlags train_flags;
    train_cmd->add_option("--config", train_config, "flat key = value config file");
    train_cmd->add_option("--out", train_out, "output directory (default out)");
    train_cmd->add_option("--dump-scenes", train_dump, "also write training scenes as PPM+txt");
    train_cmd->add_flag("--quiet", train_quiet, "suppress per-epoch progress");
    add_config_flags(train_cmd, train_flags);

    // eval -------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on generated scenes");
    std::string eval_checkpoint;
    int eval_scenes = 128;
    std::optional<std::string> eval_config;
    std::optional<std::string> eval_dump;
    ConfigFlags eval_flags;
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--scenes", eval_scenes, "number of scenes (default 128)");
    // --seed (from the config flags) doubles as the scene stream seed.
    eval_cmd->add_option("--config", eval_config, "config file describing the model");
    eval_cmd->add_option("--dump-scenes", eval_dump, "write the evaluated scenes as PPM+txt");
    add_config_flags(eval_cmd, eval_flags);

    // ablate -----------------------------------------------------------
    auto* ablate_cmd = app.add_subcommand("ablate", "run the d × depth sweep, write CSV");
    std::string ablate_out = "ablation";
    int ablate_scenes = 64;
    int ablate_epochs = 4;
    int ablate_val = 32;
    uint64_t ablate_seed = 42;
    ablate_cmd->add_option("--out", ablate_out, "output directory (default ablation)");
    ablate_cmd->add_option("--scenes", ablate_scenes, "training scenes per cell (default 64)");
    ablate_cmd->add_option("--epochs", ablate_epochs, "epochs per cell (default 4)");
    ablate_cmd->add_option("--val-scenes", ablate_val, "held-out scenes per cell (default 32)");
    ablate_cmd->add_option("--seed", ablate_seed, "seed shared by all cells (default 42)");

    // bench ------------------------------------------------------------
    auto* bench_cmd = app.add_subcommand("bench", "time external vs dense self-attention");
    int bench_smin = 64, bench_smax = 2048, bench_L = 256, bench_d = 10, bench_repeats = 9;
    std::optional<std::string> bench_out;
    bench_cmd->add_option("--smin", bench_smin, "smallest RoI count (default 64)");
    bench_cmd->add_option("--smax", bench_smax, "largest RoI count (default 2048)");
    bench_cmd->add_option("--L", bench_L, "flattened feature length (default 256)");
    bench_cmd->add_option("--d", bench_d, "memory dimension (default 10)");
    bench_cmd->add_option("--repeats", bench_repeats, "timed repeats per point (default 9)");
    bench_cmd->add_option("--out", bench_out, "CSV file (default stdout)");

    // selftest ----------------------------------------------------------
    auto* self_cmd = app.add_subcommand("selftest", "run every acceptance criterion");
    std::optional<std::string> selftest_out;
    self_cmd->add_option("--out", selftest_out, "directory for reports (default temp)");

    // dump-scenes -------------------------------------------------------
    auto* dump_cmd = app.add_subcommand("dump-scenes", "write synthetic scenes as PPM+txt");
    std::string dump_out = "scenes";
    int dump_count = 16;
    uint64_t dump_seed = 42;
    dump_cmd->add_option("--out", dump_out, "output directory (default scenes)");
    dump_cmd->add_option("--count", dump_count, "number of scenes (default 16)");
    dump_cmd->add_option("--seed", dump_seed, "base seed (default 42)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train_cmd) {
            const DetectionConfig cfg = resolve_config(train_config, train_flags);
            TrainOptions opts;
            opts.out_dir = train_out;
            if (train_dump) opts.dump_scenes_dir = *train_dump;
            opts.quiet = train_quiet;
            const TrainResult r = train(cfg, opts);
            std::printf("mAP,AP50,AP75\n%.6f,%.6f,%.6f\n", r.final_eval.ap, r.final_eval.ap50,
                        r.final_eval.ap75);
            std::fprintf(stderr, "wrote %s and %s\n", r.checkpoint_path.string().c_str(),
                         r.metrics_path.string().c_str());
        } else if (*eval_cmd) {
            if (!std::filesystem::exists(eval_checkpoint)) {
                std::fprintf(stderr, "checkpoint not found: %s\n", eval_checkpoint.c_str());
                return kExitMissingCheckpoint;
            }
            const DetectionConfig cfg = resolve_config(eval_config, eval_flags);
            const uint64_t eval_seed = cfg.seed;
            DetectionModel model = DetectionModel::init(cfg);
            model.load(load_checkpoint(eval_checkpoint));
            if (eval_dump) {
                std::filesystem::create_directories(*eval_dump);
                for (int i = 0; i < eval_scenes; ++i) {
                    const SyntheticScene s = generate_scene(val_scene_seed(eval_seed, i));
                    char name[64];
                    std::snprintf(name, sizeof(name), "scene_%05d", i);
                    write_ppm(std::filesystem::path(*eval_dump) / (std::string(name) + ".ppm"),
                              s.image);
                    write_annotations(
                        std::filesystem::path(*eval_dump) / (std::string(name) + ".txt"),
                        s.objects);
                }
            }
            const ApReport r = evaluate_model(model, eval_scenes, eval_seed);
            std::printf("mAP,AP50,AP75\n%.6f,%.6f,%.6f\n", r.ap, r.ap50, r.ap75);
        } else if (*ablate_cmd) {
            DetectionConfig base;
            base.train_scenes = ablate_scenes;
            base.val_scenes = ablate_val;
            base.epochs = ablate_epochs;
            base.lr_decay_epochs = {std::max(1, (ablate_epochs * 2) / 3),
                                    std::max(1, ablate_epochs - 1)};
            base.seed = ablate_seed;
            const auto cells = run_grid_ablation(base, true);
            std::filesystem::create_directories(ablate_out);
            const auto csv_path = std::filesystem::path(ablate_out) / "ablation.csv";
            std::ofstream csv(csv_path, std::ios::trunc);
            csv << ablation_csv(cells);
            std::ofstream md(std::filesystem::path(ablate_out) / "ablation.md", std::ios::trunc);
            md << ablation_markdown(cells);
            std::cout << ablation_csv(cells);
            std::fprintf(stderr, "wrote %s\n", csv_path.string().c_str());
        } else if (*bench_cmd) {
            const auto rows = bench_attention(bench_smin, bench_smax, bench_L, bench_d,
                                              bench_repeats);
            const std::string csv = bench_csv(rows);
            if (bench_out) {
                std::ofstream os(*bench_out, std::ios::trunc);
                os << csv;
            } else {
                std::cout << csv;
            }
        } else if (*self_cmd) {
            acceptance::Options opts;
            if (selftest_out) opts.work_dir = *selftest_out;
            opts.live = &std::cout;
            const auto results = acceptance::run_all(opts);
            return acceptance::report(results, std::cout, true) ? kExitOk : kExitFailure;
        } else if (*dump_cmd) {
            dump_scenes(dump_out, dump_count, dump_seed);
            std::fprintf(stderr, "wrote %d scenes under %s\n", dump_count, dump_out.c_str());
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitUsage;
    } catch (const CheckpointError& e) {
        std::fprintf(stderr, "checkpoint error: %s\n", e.what());
        return kExitMissingCheckpoint;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
    return kExitOk;
}
