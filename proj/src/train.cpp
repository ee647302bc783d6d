#include "roiattn/train.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "roiattn/boxcodec.hpp"
#include "roiattn/checkpoint.hpp"
#include "roiattn/ops.hpp"

namespace roiattn {

namespace {

constexpr uint64_t kTrainSceneTag = 0x747261696eull;
constexpr uint64_t kValSceneTag = 0x76616cull;
constexpr uint64_t kValPropTag = 0x76616c70ull;
constexpr uint64_t kShuffleTag = 0x73687566ull;
constexpr uint64_t kTrainPropTag = 0x70726f70ull;

constexpr float kScoreThreshold = 0.05f;
constexpr double kNmsIou = 0.5;
constexpr int kMaxDetectionsPerScene = 100;

}  // namespace

uint64_t train_scene_seed(uint64_t base, int index) {
    return mix_seed(mix_seed(base, kTrainSceneTag), uint64_t(index));
}

uint64_t val_scene_seed(uint64_t base, int index) {
    return mix_seed(mix_seed(base, kValSceneTag), uint64_t(index));
}

uint64_t val_proposal_seed(uint64_t base, int index) {
    return mix_seed(mix_seed(base, kValPropTag), uint64_t(index));
}

std::vector<Detection> detect_scene(const DetectionModel& model, const SyntheticScene& scene,
                                    const std::vector<BoxXYXY>& proposals, int image_id) {
    const HeadOutput out = model.forward(scene.image, proposals);
    const Tensor probs = softmax_dim(out.class_logits, 1);
    const int s = int(proposals.size());

    std::vector<Detection> all;
    for (int cls = 0; cls < kNumClasses; ++cls) {
        std::vector<BoxXYXY> boxes;
        std::vector<float> scores;
        for (int i = 0; i < s; ++i) {
            const float score = probs.at({i, cls});
            if (score < kScoreThreshold) continue;
            std::array<float, 4> delta{out.box_deltas.at({i, 0}), out.box_deltas.at({i, 1}),
                                       out.box_deltas.at({i, 2}), out.box_deltas.at({i, 3})};
            BoxXYXY decoded = decode_box_delta(proposals[size_t(i)], delta,
                                               float(kImageSize), float(kImageSize));
            if (!decoded.valid()) continue;
            boxes.push_back(decoded);
            scores.push_back(score);
        }
        for (int keep : nms_greedy(boxes, scores, kNmsIou)) {
            all.push_back({image_id, cls, scores[size_t(keep)], boxes[size_t(keep)]});
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const Detection& a, const Detection& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.cls < b.cls;
    });
    if (int(all.size()) > kMaxDetectionsPerScene) all.resize(kMaxDetectionsPerScene);
    return all;
}

ApReport evaluate_model(const DetectionModel& model, int scenes, uint64_t seed) {
    std::vector<Detection> detections;
    std::vector<GtBox> ground_truth;
    for (int i = 0; i < scenes; ++i) {
        const SyntheticScene scene = generate_scene(val_scene_seed(seed, i));
        const auto proposals = make_proposals(scene, val_proposal_seed(seed, i));
        const auto dets = detect_scene(model, scene, proposals, i);
        detections.insert(detections.end(), dets.begin(), dets.end());
        for (const SceneObject& o : scene.objects) {
            ground_truth.push_back({i, o.cls, o.box});
        }
    }
    return evaluate_map(detections, ground_truth, coco_thresholds(), kNumClasses);
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
    std::string out = "epoch,loss,mAP,AP50,AP75\n";
    char line[160];
    for (const EpochMetrics& m : history) {
        std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.6f\n", m.epoch, m.loss, m.map,
                      m.ap50, m.ap75);
        out += line;
    }
    return out;
}

TrainResult train(const DetectionConfig& cfg, const TrainOptions& opts) {
    cfg.validate();
    TrainResult result;
    result.model = DetectionModel::init(cfg);

    std::vector<NamedParam> params = result.model.parameters();
    std::vector<Tensor> param_tensors;
    for (const NamedParam& p : params) param_tensors.push_back(p.tensor);
    SgdOptimizer opt(param_tensors, cfg.lr, cfg.momentum, cfg.weight_decay);

    if (!opts.dump_scenes_dir.empty()) {
        std::filesystem::create_directories(opts.dump_scenes_dir);
        for (int i = 0; i < cfg.train_scenes; ++i) {
            const SyntheticScene scene = generate_scene(train_scene_seed(cfg.seed, i));
            char name[64];
            std::snprintf(name, sizeof(name), "scene_%05d", i);
            write_ppm(opts.dump_scenes_dir / (std::string(name) + ".ppm"), scene.image);
            write_annotations(opts.dump_scenes_dir / (std::string(name) + ".txt"), scene.objects);
        }
    }

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        float lr = cfg.lr;
        for (int decay_after : cfg.lr_decay_epochs) {
            if (epoch > decay_after) lr *= 0.1f;
        }
        opt.set_lr(lr);

        // Seeded shuffle of the scene order.
        std::vector<int> order(size_t(cfg.train_scenes));
        for (int i = 0; i < cfg.train_scenes; ++i) order[size_t(i)] = i;
        Rng shuffle_rng(mix_seed(mix_seed(cfg.seed, kShuffleTag), uint64_t(epoch)));
        for (int i = cfg.train_scenes - 1; i > 0; --i) {
            const int j = shuffle_rng.uniform_int(0, i);
            std::swap(order[size_t(i)], order[size_t(j)]);
        }

        double epoch_loss = 0.0;
        for (int step = 0; step < cfg.train_scenes; ++step) {
            const int scene_idx = order[size_t(step)];
            const SyntheticScene scene = generate_scene(train_scene_seed(cfg.seed, scene_idx));
            const uint64_t prop_seed = mix_seed(mix_seed(cfg.seed, kTrainPropTag),
                                                uint64_t(epoch) * 1000003ull + uint64_t(scene_idx));
            const auto proposals = make_proposals(scene, prop_seed);
            const TrainingSample sample = assign_and_encode(proposals, scene.objects);

            Tape tape;
            TapeScope scope(tape);
            const HeadOutput out = result.model.forward(scene.image, sample.proposals);
            LossBreakdown loss = detection_loss(out, sample);
            epoch_loss += double(loss.total.data()[0]);
            tape.backward(loss.total);
            opt.step();
            opt.zero_grad();
        }
        epoch_loss /= double(cfg.train_scenes);

        const ApReport eval = evaluate_model(result.model, cfg.val_scenes, cfg.seed);
        result.history.push_back({epoch, epoch_loss, eval.ap, eval.ap50, eval.ap75});
        result.final_eval = eval;
        if (!opts.quiet) {
            std::fprintf(stderr, "epoch %2d  lr %.5f  loss %.4f  mAP %.4f  AP50 %.4f  AP75 %.4f\n",
                         epoch, double(lr), epoch_loss, eval.ap, eval.ap50, eval.ap75);
        }
    }

    if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        result.checkpoint_path = opts.out_dir / "checkpoint.ratn";
        result.metrics_path = opts.out_dir / "metrics.csv";
        save_checkpoint(result.checkpoint_path, result.model.parameters());
        std::ofstream metrics(result.metrics_path, std::ios::trunc);
        metrics << metrics_csv(result.history);
        std::ofstream cfg_echo(opts.out_dir / "config.cfg", std::ios::trunc);
        cfg_echo << config_to_text(cfg);
    }
    return result;
}

}  // namespace roiattn
