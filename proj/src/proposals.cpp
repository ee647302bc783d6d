#include "roiattn/proposals.hpp"

#include <algorithm>

#include "roiattn/boxcodec.hpp"
#include "roiattn/common.hpp"

namespace roiattn {

std::vector<BoxXYXY> make_proposals(const SyntheticScene& scene, uint64_t seed,
                                    const ProposalConfig& cfg) {
    Rng rng(seed);
    std::vector<BoxXYXY> out;
    out.reserve(scene.objects.size() * size_t(cfg.positives_per_gt) + size_t(cfg.negatives));
    const double img = kImageSize;

    for (const SceneObject& obj : scene.objects) {
        const double w = double(obj.box.x2) - obj.box.x1;
        const double h = double(obj.box.y2) - obj.box.y1;
        const double cx = 0.5 * (double(obj.box.x1) + obj.box.x2);
        const double cy = 0.5 * (double(obj.box.y1) + obj.box.y2);
        for (int k = 0; k < cfg.positives_per_gt; ++k) {
            const double jx = rng.uniform(-cfg.center_jitter, cfg.center_jitter) * w;
            const double jy = rng.uniform(-cfg.center_jitter, cfg.center_jitter) * h;
            const double s = rng.uniform(cfg.scale_lo, cfg.scale_hi);
            BoxXYXY b;
            b.x1 = float(std::clamp(cx + jx - 0.5 * w * s, 0.0, img));
            b.y1 = float(std::clamp(cy + jy - 0.5 * h * s, 0.0, img));
            b.x2 = float(std::clamp(cx + jx + 0.5 * w * s, 0.0, img));
            b.y2 = float(std::clamp(cy + jy + 0.5 * h * s, 0.0, img));
            out.push_back(b);
        }
    }

    for (int k = 0; k < cfg.negatives; ++k) {
        const double w = rng.uniform(12.0, 48.0);
        const double h = rng.uniform(12.0, 48.0);
        const double x1 = rng.uniform(0.0, img - w);
        const double y1 = rng.uniform(0.0, img - h);
        out.push_back({float(x1), float(y1), float(x1 + w), float(y1 + h)});
    }
    return out;
}

TrainingSample assign_and_encode(const std::vector<BoxXYXY>& proposals,
                                 const std::vector<SceneObject>& ground_truth,
                                 float fg_iou) {
    TrainingSample sample;
    sample.proposals = proposals;
    sample.labels.resize(proposals.size(), kBackgroundClass);
    sample.target_deltas.resize(proposals.size(), {0.0f, 0.0f, 0.0f, 0.0f});
    for (size_t i = 0; i < proposals.size(); ++i) {
        double best = 0.0;
        int best_gt = -1;
        for (size_t g = 0; g < ground_truth.size(); ++g) {
            const double iou = box_iou(proposals[i], ground_truth[g].box);
            if (iou > best) {
                best = iou;
                best_gt = int(g);
            }
        }
        if (best_gt >= 0 && best >= double(fg_iou)) {
            sample.labels[i] = ground_truth[size_t(best_gt)].cls;
            sample.target_deltas[i] =
                encode_box_delta(proposals[i], ground_truth[size_t(best_gt)].box);
            sample.foreground.push_back(int(i));
        }
    }
    return sample;
}

}  // namespace roiattn
