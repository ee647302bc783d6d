#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "roiattn/ops.hpp"

namespace roiattn::oracle {

std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                 int m, int k, int n) {
    std::vector<double> c(size_t(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a[size_t(i) * k + p] * b[size_t(p) * n + j];
            c[size_t(i) * n + j] = s;
        }
    }
    return c;
}

std::vector<double> naive_attention_scores(const std::vector<double>& x,
                                           const std::vector<double>& mk,
                                           int s, int L, int d) {
    std::vector<double> scores(size_t(s) * d, 0.0);
    for (int i = 0; i < s; ++i) {
        for (int j = 0; j < d; ++j) {
            double acc = 0.0;
            for (int l = 0; l < L; ++l) acc += x[size_t(i) * L + l] * mk[size_t(j) * L + l];
            scores[size_t(i) * d + j] = acc;
        }
    }
    // Softmax down each column (over the RoI index).
    for (int j = 0; j < d; ++j) {
        double mx = scores[size_t(j)];
        for (int i = 1; i < s; ++i) mx = std::max(mx, scores[size_t(i) * d + j]);
        double denom = 0.0;
        for (int i = 0; i < s; ++i) denom += std::exp(scores[size_t(i) * d + j] - mx);
        for (int i = 0; i < s; ++i) {
            scores[size_t(i) * d + j] = std::exp(scores[size_t(i) * d + j] - mx) / denom;
        }
    }
    // L1 along each row (over the memory index).
    for (int i = 0; i < s; ++i) {
        double sum = 0.0;
        for (int j = 0; j < d; ++j) sum += scores[size_t(i) * d + j];
        const double denom = sum + 1e-9;
        for (int j = 0; j < d; ++j) scores[size_t(i) * d + j] /= denom;
    }
    return scores;
}

std::vector<double> naive_attention_forward(const std::vector<double>& x,
                                            const std::vector<double>& mk,
                                            const std::vector<double>& mv,
                                            int s, int L, int d) {
    const std::vector<double> a = naive_attention_scores(x, mk, s, L, d);
    std::vector<double> out(x);
    for (int i = 0; i < s; ++i) {
        for (int l = 0; l < L; ++l) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) acc += a[size_t(i) * d + j] * mv[size_t(j) * L + l];
            out[size_t(i) * L + l] += acc;
        }
    }
    return out;
}

std::vector<double> naive_posencode(const std::vector<double>& x, const std::vector<double>& w,
                                    const std::vector<double>& bias, int c, int h, int wdt) {
    std::vector<double> out(size_t(c) * h * wdt, 0.0);
    for (int o = 0; o < c; ++o) {
        for (int r = 0; r < h; ++r) {
            for (int col = 0; col < wdt; ++col) {
                double acc = bias[size_t(o)];
                for (int i = 0; i < c; ++i) {
                    acc += w[size_t(o) * (c + 2) + i] * x[(size_t(i) * h + r) * wdt + col];
                }
                acc += w[size_t(o) * (c + 2) + c] * (double(col) / wdt);
                acc += w[size_t(o) * (c + 2) + c + 1] * (double(r) / h);
                out[(size_t(o) * h + r) * wdt + col] = acc;
            }
        }
    }
    return out;
}

namespace {

double bilinear_at(const std::vector<double>& plane, int fh, int fw, double py, double px) {
    double uy = std::clamp(py - 0.5, 0.0, double(fh - 1));
    double ux = std::clamp(px - 0.5, 0.0, double(fw - 1));
    const int y0 = std::min(int(uy), fh - 1);
    const int x0 = std::min(int(ux), fw - 1);
    const int y1 = std::min(y0 + 1, fh - 1);
    const int x1 = std::min(x0 + 1, fw - 1);
    const double ty = uy - y0;
    const double tx = ux - x0;
    return (1 - ty) * (1 - tx) * plane[size_t(y0) * fw + x0] +
           (1 - ty) * tx * plane[size_t(y0) * fw + x1] +
           ty * (1 - tx) * plane[size_t(y1) * fw + x0] +
           ty * tx * plane[size_t(y1) * fw + x1];
}

}  // namespace

std::vector<double> naive_roi_align(const std::vector<double>& features, int c, int fh, int fw,
                                    const BoxXYXY& box, int out_h, int out_w,
                                    float spatial_scale, int samples) {
    std::vector<double> out(size_t(c) * out_h * out_w, 0.0);
    const double x1 = double(box.x1) * spatial_scale;
    const double y1 = double(box.y1) * spatial_scale;
    const double bin_h = (double(box.y2) - box.y1) * spatial_scale / out_h;
    const double bin_w = (double(box.x2) - box.x1) * spatial_scale / out_w;
    for (int ci = 0; ci < c; ++ci) {
        std::vector<double> plane(features.begin() + size_t(ci) * fh * fw,
                                  features.begin() + size_t(ci + 1) * fh * fw);
        for (int by = 0; by < out_h; ++by) {
            for (int bx = 0; bx < out_w; ++bx) {
                double acc = 0.0;
                for (int qy = 0; qy < samples; ++qy) {
                    const double py = y1 + (by + (qy + 0.5) / samples) * bin_h;
                    for (int qx = 0; qx < samples; ++qx) {
                        const double px = x1 + (bx + (qx + 0.5) / samples) * bin_w;
                        acc += bilinear_at(plane, fh, fw, py, px);
                    }
                }
                out[(size_t(ci) * out_h + by) * out_w + bx] = acc / (samples * samples);
            }
        }
    }
    return out;
}

std::vector<double> naive_conv2d(const std::vector<double>& x, int n, int c, int h, int w,
                                 const std::vector<double>& weight, int o, int kh, int kw,
                                 const std::vector<double>& bias, int stride, int padding) {
    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (w + 2 * padding - kw) / stride + 1;
    std::vector<double> out(size_t(n) * o * oh * ow, 0.0);
    for (int ni = 0; ni < n; ++ni) {
        for (int oc = 0; oc < o; ++oc) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bias[size_t(oc)];
                    for (int ci = 0; ci < c; ++ci) {
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy * stride + ky - padding;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox * stride + kx - padding;
                                if (ix < 0 || ix >= w) continue;
                                acc += x[((size_t(ni) * c + ci) * h + iy) * w + ix] *
                                       weight[((size_t(oc) * c + ci) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    out[((size_t(ni) * o + oc) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    return out;
}

namespace {

double naive_iou(const BoxXYXY& a, const BoxXYXY& b) {
    const double ix = std::min(double(a.x2), double(b.x2)) - std::max(double(a.x1), double(b.x1));
    const double iy = std::min(double(a.y2), double(b.y2)) - std::max(double(a.y1), double(b.y1));
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    const double ua = std::max(0.0, double(a.x2) - a.x1) * std::max(0.0, double(a.y2) - a.y1);
    const double ub = std::max(0.0, double(b.x2) - b.x1) * std::max(0.0, double(b.y2) - b.y1);
    return ua + ub - inter > 0.0 ? inter / (ua + ub - inter) : 0.0;
}

}  // namespace

NaiveApResult naive_evaluate_map(const std::vector<NaiveDet>& dets,
                                 const std::vector<NaiveGt>& gts,
                                 const std::vector<double>& thresholds, int num_classes) {
    NaiveApResult result;
    double sum_ap = 0.0, sum_ap50 = 0.0, sum_ap75 = 0.0;
    int classes = 0;
    for (int cls = 0; cls < num_classes; ++cls) {
        std::vector<const NaiveGt*> class_gts;
        for (const NaiveGt& g : gts) {
            if (g.cls == cls) class_gts.push_back(&g);
        }
        if (class_gts.empty()) continue;
        ++classes;

        // Detections in score order; ties by (image, original position).
        std::vector<size_t> order;
        for (size_t i = 0; i < dets.size(); ++i) {
            if (dets[i].cls == cls) order.push_back(i);
        }
        for (size_t a = 0; a < order.size(); ++a) {
            for (size_t b = a + 1; b < order.size(); ++b) {
                const NaiveDet& da = dets[order[a]];
                const NaiveDet& db = dets[order[b]];
                const bool swap = db.score > da.score ||
                                  (db.score == da.score &&
                                   (db.image < da.image ||
                                    (db.image == da.image && order[b] < order[a])));
                if (swap) std::swap(order[a], order[b]);
            }
        }

        double cls_sum = 0.0, cls50 = 0.0, cls75 = 0.0;
        for (double threshold : thresholds) {
            std::vector<bool> gt_used(class_gts.size(), false);
            std::vector<int> is_tp(order.size(), 0);
            for (size_t di = 0; di < order.size(); ++di) {
                const NaiveDet& det = dets[order[di]];
                double best = 0.0;
                int pick = -1;
                for (size_t gi = 0; gi < class_gts.size(); ++gi) {
                    if (gt_used[gi] || class_gts[gi]->image != det.image) continue;
                    const double iou = naive_iou(det.box, class_gts[gi]->box);
                    if (iou >= threshold && iou > best) {
                        best = iou;
                        pick = int(gi);
                    }
                }
                if (pick >= 0) {
                    gt_used[size_t(pick)] = true;
                    is_tp[di] = 1;
                }
            }
            std::vector<double> precision, recall;
            int tp = 0;
            for (size_t i = 0; i < order.size(); ++i) {
                tp += is_tp[i];
                precision.push_back(double(tp) / double(i + 1));
                recall.push_back(double(tp) / double(class_gts.size()));
            }
            double ap = 0.0;
            for (int ri = 0; ri <= 100; ++ri) {
                const double r = ri / 100.0;
                double best_p = 0.0;
                for (size_t i = 0; i < precision.size(); ++i) {
                    if (recall[i] >= r) best_p = std::max(best_p, precision[i]);
                }
                ap += best_p;
            }
            ap /= 101.0;
            cls_sum += ap;
            if (std::abs(threshold - 0.5) < 1e-9) cls50 = ap;
            if (std::abs(threshold - 0.75) < 1e-9) cls75 = ap;
        }
        sum_ap += cls_sum / double(thresholds.size());
        sum_ap50 += cls50;
        sum_ap75 += cls75;
    }
    if (classes > 0) {
        result.ap = sum_ap / classes;
        result.ap50 = sum_ap50 / classes;
        result.ap75 = sum_ap75 / classes;
    }
    return result;
}

void fill_unit_order(Tensor& t, Rng& rng) {
    float* v = t.data();
    for (int64_t i = 0; i < t.numel(); ++i) {
        const double mag = rng.uniform(0.05, 1.5);
        v[i] = float(rng.uniform() < 0.5 ? -mag : mag);
    }
}

namespace {

struct LossEval {
    double value = 0.0;
    double abs_sum = 0.0;  // sum of |w_i * out_i|, the rounding-noise scale
};

LossEval weighted_loss(const Tensor& out, const std::vector<double>& w) {
    const float* v = out.data();
    LossEval e;
    for (int64_t i = 0; i < out.numel(); ++i) {
        const double term = w[size_t(i)] * double(v[i]);
        e.value += term;
        e.abs_sum += std::abs(term);
    }
    return e;
}

}  // namespace

GradCheckResult check_gradients(const std::function<Tensor()>& forward,
                                std::vector<Tensor> inputs, Rng& rng,
                                int directions, double step,
                                double rel_tol, double abs_tol) {
    GradCheckResult res;
    for (Tensor& t : inputs) {
        if (!t.requires_grad()) t.set_requires_grad(true);
        t.zero_grad();
    }

    // Loss weights fixed for the whole check; analytic gradient taken once.
    std::vector<double> loss_weights;
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor probe_out = forward();
        std::vector<float> wf(size_t(probe_out.numel()));
        Rng wrng(rng.next_u64());
        for (auto& v : wf) v = float(wrng.uniform(0.5, 1.5));
        Tensor loss = weighted_sum(probe_out, wf);
        tape.backward(loss);
        loss_weights.assign(wf.begin(), wf.end());
    }
    std::vector<std::vector<float>> saved;

    int64_t total_coords = 0;
    for (const Tensor& t : inputs) total_coords += t.numel();
    // Unit-norm probe directions: entries ~ ±U(0.5,1.5)/sqrt(N). This keeps
    // the joint perturbation bounded for wide layers (per-coordinate ±1
    // entries would shift pre-activations by sqrt(N)*h and land on ReLU
    // kinks almost surely) while the directional derivative aggregates the
    // whole gradient vector at ‖∇‖ scale.
    const double dir_scale = 1.0 / std::sqrt(double(std::max<int64_t>(total_coords, 1)));

    const int max_redraws = 12;
    int accepted = 0;
    while (accepted < directions) {
        bool found_valid = false;
        for (int attempt = 0; attempt < max_redraws && !found_valid; ++attempt) {
            std::vector<std::vector<float>> dirs;
            double analytic = 0.0;
            for (Tensor& t : inputs) {
                std::vector<float> v(size_t(t.numel()));
                for (auto& e : v) {
                    const double mag = rng.uniform(0.5, 1.5) * dir_scale;
                    e = float(rng.uniform() < 0.5 ? -mag : mag);
                }
                const float* g = t.grad();
                for (size_t i = 0; i < v.size(); ++i) analytic += double(g[i]) * double(v[i]);
                dirs.push_back(std::move(v));
            }

            saved.clear();
            for (Tensor& t : inputs) {
                saved.emplace_back(t.data(), t.data() + t.numel());
            }

            uint64_t base_pattern = 0;
            auto eval_at = [&](double offset, uint64_t* pattern) {
                for (size_t ti = 0; ti < inputs.size(); ++ti) {
                    float* data = inputs[ti].data();
                    const std::vector<float>& v = dirs[ti];
                    for (size_t i = 0; i < v.size(); ++i) {
                        data[i] = saved[ti][i] + float(offset * v[i]);
                    }
                }
                relu_probe_reset(true);
                Tensor out = forward();
                *pattern = relu_probe_pattern();
                relu_probe_reset(false);
                return weighted_loss(out, loss_weights);
            };

            uint64_t pat_c, pat_p, pat_m, pat_p2, pat_m2;
            eval_at(0.0, &pat_c);
            base_pattern = pat_c;
            const LossEval lp = eval_at(step, &pat_p);
            const LossEval lm = eval_at(-step, &pat_m);
            const LossEval lp2 = eval_at(step * 0.5, &pat_p2);
            const LossEval lm2 = eval_at(-step * 0.5, &pat_m2);

            // Restore.
            for (size_t ti = 0; ti < inputs.size(); ++ti) {
                std::copy(saved[ti].begin(), saved[ti].end(), inputs[ti].data());
            }

            // A direction is only a valid difference quotient if no ReLU
            // unit switched state anywhere in the probe interval; kinked
            // directions are redrawn, never compared.
            if (pat_p != base_pattern || pat_m != base_pattern ||
                pat_p2 != base_pattern || pat_m2 != base_pattern) {
                continue;
            }

            const double fd = (lp.value - lm.value) / (2.0 * step);
            const double fd_half = (lp2.value - lm2.value) / step;
            const double probe_diff = std::abs(fd - fd_half);

            // Resolution of the difference quotient itself. Two terms: an
            // analytic bound from float32 storage of the weighted-sum
            // terms, and the step-halving disagreement, which measures the
            // realized rounding noise through the whole forward (deep
            // graphs round every intermediate). Neither can mask a wrong
            // analytic gradient: a bug leaves fd(h) and fd(h/2) agreeing
            // with each other while both disagree with the tape at
            // O(|gradient error|).
            const double eps32 = 6.0e-8;
            const double fd_noise =
                4.0 * eps32 * (lp.abs_sum + lm.abs_sum) / (2.0 * step) + 3.0 * probe_diff;

            found_valid = true;
            ++accepted;
            ++res.directions_checked;
            const double err = std::abs(fd - analytic);
            const double tol = std::max({abs_tol, rel_tol * std::max(std::abs(fd), std::abs(analytic)),
                                         fd_noise});
            res.worst_abs_err = std::max(res.worst_abs_err, err);
            if (err > tol) {
                res.ok = false;
                char buf[160];
                std::snprintf(buf, sizeof(buf),
                              "directional derivative mismatch: fd=%.8g analytic=%.8g err=%.3g tol=%.3g",
                              fd, analytic, err, tol);
                res.message = buf;
                return res;
            }
        }
        if (!found_valid) {
            res.ok = false;
            res.exhausted = true;
            res.message = "could not find a kink-free direction after redraws";
            return res;
        }
    }
    return res;
}

}  // namespace roiattn::oracle
