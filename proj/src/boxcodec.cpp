#include "roiattn/boxcodec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace roiattn {

double box_iou(const BoxXYXY& a, const BoxXYXY& b) {
    const double iw = std::min(double(a.x2), double(b.x2)) - std::max(double(a.x1), double(b.x1));
    const double ih = std::min(double(a.y2), double(b.y2)) - std::max(double(a.y1), double(b.y1));
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double area_a = std::max(0.0, double(a.x2) - a.x1) * std::max(0.0, double(a.y2) - a.y1);
    const double area_b = std::max(0.0, double(b.x2) - b.x1) * std::max(0.0, double(b.y2) - b.y1);
    const double uni = area_a + area_b - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::array<float, 4> encode_box_delta(const BoxXYXY& proposal, const BoxXYXY& target) {
    if (!proposal.valid() || !target.valid()) {
        throw ShapeError("encode_box_delta: degenerate box, proposal " + proposal.str() +
                         ", target " + target.str());
    }
    const double pw = double(proposal.x2) - proposal.x1;
    const double ph = double(proposal.y2) - proposal.y1;
    const double pcx = 0.5 * (double(proposal.x1) + proposal.x2);
    const double pcy = 0.5 * (double(proposal.y1) + proposal.y2);
    const double tw = double(target.x2) - target.x1;
    const double th = double(target.y2) - target.y1;
    const double tcx = 0.5 * (double(target.x1) + target.x2);
    const double tcy = 0.5 * (double(target.y1) + target.y2);
    return {float((tcx - pcx) / pw), float((tcy - pcy) / ph), float(std::log(tw / pw)),
            float(std::log(th / ph))};
}

BoxXYXY decode_box_delta(const BoxXYXY& proposal, const std::array<float, 4>& delta,
                         float image_w, float image_h) {
    const double pw = double(proposal.x2) - proposal.x1;
    const double ph = double(proposal.y2) - proposal.y1;
    const double pcx = 0.5 * (double(proposal.x1) + proposal.x2);
    const double pcy = 0.5 * (double(proposal.y1) + proposal.y2);
    const double cx = pcx + double(delta[0]) * pw;
    const double cy = pcy + double(delta[1]) * ph;
    const double w = pw * std::exp(std::clamp(double(delta[2]), -4.0, 4.0));
    const double h = ph * std::exp(std::clamp(double(delta[3]), -4.0, 4.0));
    BoxXYXY out;
    out.x1 = float(std::clamp(cx - 0.5 * w, 0.0, double(image_w)));
    out.y1 = float(std::clamp(cy - 0.5 * h, 0.0, double(image_h)));
    out.x2 = float(std::clamp(cx + 0.5 * w, 0.0, double(image_w)));
    out.y2 = float(std::clamp(cy + 0.5 * h, 0.0, double(image_h)));
    return out;
}

std::vector<int> nms_greedy(const std::vector<BoxXYXY>& boxes,
                            const std::vector<float>& scores, double iou_thresh) {
    std::vector<int> order(boxes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[size_t(a)] != scores[size_t(b)]) return scores[size_t(a)] > scores[size_t(b)];
        return a < b;
    });
    std::vector<int> kept;
    std::vector<bool> suppressed(boxes.size(), false);
    for (int idx : order) {
        if (suppressed[size_t(idx)]) continue;
        kept.push_back(idx);
        for (int other : order) {
            if (other == idx || suppressed[size_t(other)]) continue;
            if (box_iou(boxes[size_t(idx)], boxes[size_t(other)]) > iou_thresh) {
                suppressed[size_t(other)] = true;
            }
        }
    }
    return kept;
}

}  // namespace roiattn
