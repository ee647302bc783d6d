#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "roiattn/map_eval.hpp"
#include "roiattn/model.hpp"

namespace roiattn {

struct EpochMetrics {
    int epoch = 0;
    double loss = 0.0;
    double map = 0.0;
    double ap50 = 0.0;
    double ap75 = 0.0;
};

struct TrainOptions {
    std::filesystem::path out_dir;          // write checkpoint/metrics iff set
    std::filesystem::path dump_scenes_dir;  // write the training scenes iff set
    bool quiet = true;                      // per-epoch progress on stderr
};

struct TrainResult {
    DetectionModel model;
    std::vector<EpochMetrics> history;
    ApReport final_eval;
    std::filesystem::path checkpoint_path;
    std::filesystem::path metrics_path;
};

// Deterministic end-to-end training: scenes, proposals, shuffling and
// initialization all derive from cfg.seed, so identical configs produce
// byte-identical metrics files and checkpoints. The learning rate decays
// by 0.1 after each epoch listed in lr_decay_epochs.
TrainResult train(const DetectionConfig& cfg, const TrainOptions& opts = {});

// Runs the detector on one scene's proposals: class-wise score threshold
// 0.05, greedy NMS at IoU 0.5, at most 100 detections per scene.
std::vector<Detection> detect_scene(const DetectionModel& model, const SyntheticScene& scene,
                                    const std::vector<BoxXYXY>& proposals, int image_id);

// Generates `scenes` held-out scenes (and their proposals) from a seed
// stream and evaluates the model over the usual IoU grid.
ApReport evaluate_model(const DetectionModel& model, int scenes, uint64_t seed);

// UTF-8 "epoch,loss,mAP,AP50,AP75" with a header row.
std::string metrics_csv(const std::vector<EpochMetrics>& history);

// Seed streams, shared by training and the CLI so runs are reproducible.
uint64_t train_scene_seed(uint64_t base, int index);
uint64_t val_scene_seed(uint64_t base, int index);
uint64_t val_proposal_seed(uint64_t base, int index);

}  // namespace roiattn
