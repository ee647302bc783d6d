#include "roiattn/map_eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "roiattn/boxcodec.hpp"

namespace roiattn {

std::vector<double> coco_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
    return t;
}

namespace {

// AP at one (class, threshold): greedy matching then 101-point
// interpolation of the precision envelope.
double ap_single(const std::vector<const Detection*>& dets_sorted,
                 const std::map<int, std::vector<const GtBox*>>& gt_by_image,
                 int total_gt, double threshold) {
    if (total_gt == 0) return -1.0;
    std::map<int, std::vector<bool>> matched;
    for (const auto& [img, gts] : gt_by_image) {
        matched[img].assign(gts.size(), false);
    }
    std::vector<int> tp(dets_sorted.size(), 0);
    for (size_t di = 0; di < dets_sorted.size(); ++di) {
        const Detection* det = dets_sorted[di];
        auto it = gt_by_image.find(det->image_id);
        if (it == gt_by_image.end()) continue;
        const auto& gts = it->second;
        auto& used = matched[det->image_id];
        double best_iou = 0.0;
        int best = -1;
        for (size_t gi = 0; gi < gts.size(); ++gi) {
            if (used[gi]) continue;
            const double iou = box_iou(det->box, gts[gi]->box);
            if (iou >= threshold && iou > best_iou) {
                best_iou = iou;
                best = int(gi);
            }
        }
        if (best >= 0) {
            used[size_t(best)] = true;
            tp[di] = 1;
        }
    }

    // Precision/recall points in rank order.
    std::vector<double> precision(dets_sorted.size()), recall(dets_sorted.size());
    int cum_tp = 0;
    for (size_t i = 0; i < dets_sorted.size(); ++i) {
        cum_tp += tp[i];
        precision[i] = double(cum_tp) / double(i + 1);
        recall[i] = double(cum_tp) / double(total_gt);
    }
    // Envelope: max precision at recall >= r.
    for (int i = int(precision.size()) - 2; i >= 0; --i) {
        precision[size_t(i)] = std::max(precision[size_t(i)], precision[size_t(i) + 1]);
    }
    double ap = 0.0;
    size_t pt = 0;
    for (int ri = 0; ri <= 100; ++ri) {
        const double r = ri / 100.0;
        while (pt < recall.size() && recall[pt] < r) ++pt;
        ap += pt < recall.size() ? precision[pt] : 0.0;
    }
    return ap / 101.0;
}

}  // namespace

ApReport evaluate_map(const std::vector<Detection>& detections,
                      const std::vector<GtBox>& ground_truth,
                      const std::vector<double>& thresholds, int num_classes) {
    if (thresholds.empty()) throw ConfigError("evaluate_map: no IoU thresholds");
    ApReport report;
    report.per_class_ap.assign(size_t(num_classes), -1.0);

    double sum_ap = 0.0, sum_ap50 = 0.0, sum_ap75 = 0.0;
    int classes_with_gt = 0;

    for (int cls = 0; cls < num_classes; ++cls) {
        std::map<int, std::vector<const GtBox*>> gt_by_image;
        int total_gt = 0;
        for (const GtBox& g : ground_truth) {
            if (g.cls == cls) {
                gt_by_image[g.image_id].push_back(&g);
                ++total_gt;
            }
        }
        if (total_gt == 0) continue;  // class absent: excluded from means

        std::vector<const Detection*> dets;
        for (const Detection& d : detections) {
            if (d.cls == cls) dets.push_back(&d);
        }
        std::stable_sort(dets.begin(), dets.end(), [&](const Detection* a, const Detection* b) {
            if (a->score != b->score) return a->score > b->score;
            if (a->image_id != b->image_id) return a->image_id < b->image_id;
            return a < b;  // insertion order via stable_sort over pointers into one vector
        });

        double cls_sum = 0.0;
        double cls_ap50 = 0.0, cls_ap75 = 0.0;
        for (double t : thresholds) {
            const double ap = ap_single(dets, gt_by_image, total_gt, t);
            cls_sum += ap;
            if (std::abs(t - 0.5) < 1e-9) cls_ap50 = ap;
            if (std::abs(t - 0.75) < 1e-9) cls_ap75 = ap;
        }
        const double cls_ap = cls_sum / double(thresholds.size());
        report.per_class_ap[size_t(cls)] = cls_ap;
        sum_ap += cls_ap;
        sum_ap50 += cls_ap50;
        sum_ap75 += cls_ap75;
        ++classes_with_gt;
    }

    if (classes_with_gt > 0) {
        report.ap = sum_ap / classes_with_gt;
        report.ap50 = sum_ap50 / classes_with_gt;
        report.ap75 = sum_ap75 / classes_with_gt;
    }
    return report;
}

}  // namespace roiattn
