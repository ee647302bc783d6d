#include "roiattn/attention.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "roiattn/gemm.hpp"
#include "roiattn/ops.hpp"

namespace roiattn {

ExternalAttentionBlock ExternalAttentionBlock::init(int d, int L, Rng& rng) {
    if (d < 1 || L < 1) {
        throw ConfigError("attention block needs d >= 1 and L >= 1, got d=" +
                          std::to_string(d) + " L=" + std::to_string(L));
    }
    ExternalAttentionBlock b;
    b.d = d;
    b.L = L;
    const double stdev = 1.0 / std::sqrt(double(L));
    b.key_memory = Tensor::randn({d, L}, rng, stdev, true);
    b.value_memory = Tensor::randn({d, L}, rng, stdev, true);
    return b;
}

RoiAttentionStack RoiAttentionStack::init(int depth, int d, int L, Rng& rng) {
    if (depth < 0) throw ConfigError("attention depth must be >= 0");
    RoiAttentionStack s;
    for (int i = 0; i < depth; ++i) s.blocks.push_back(ExternalAttentionBlock::init(d, L, rng));
    return s;
}

void RoiAttentionStack::collect_params(std::vector<NamedParam>& out,
                                       const std::string& prefix) const {
    for (size_t i = 0; i < blocks.size(); ++i) {
        const std::string base = prefix + ".block" + std::to_string(i);
        out.push_back({base + ".key_memory", blocks[i].key_memory});
        out.push_back({base + ".value_memory", blocks[i].value_memory});
    }
}

Tensor double_normalize(const Tensor& scores) {
    if (scores.rank() != 2) {
        throw ShapeError("double_normalize: expected s×d scores, got " +
                         shape_str(scores.shape()));
    }
    Tensor col_softmax = softmax_dim(scores, 0);
    return l1_normalize_dim(col_softmax, 1, kAttentionL1Eps);
}

Tensor attention_scores(const Tensor& x, const ExternalAttentionBlock& block) {
    if (x.rank() != 2 || x.dim(1) != block.L) {
        throw ShapeError("attention_scores: input " + shape_str(x.shape()) +
                         " does not match memory " + shape_str(block.key_memory.shape()));
    }
    return double_normalize(matmul(x, transpose2d(block.key_memory)));
}

Tensor attention_forward(const Tensor& x, const ExternalAttentionBlock& block) {
    Tensor a = attention_scores(x, block);
    return add(matmul(a, block.value_memory), x);
}

Tensor stack_forward(const Tensor& x, const RoiAttentionStack& stack) {
    if (stack.depth() == 0) return x;
    if (x.rank() != 4) {
        throw ShapeError("stack_forward: expected s×c×h×w input, got " + shape_str(x.shape()));
    }
    const int64_t flat = int64_t(x.dim(1)) * x.dim(2) * x.dim(3);
    if (flat != stack.feature_length()) {
        throw ShapeError("stack_forward: flattened length " + std::to_string(flat) +
                         " does not match attention L " +
                         std::to_string(stack.feature_length()) + " for input " +
                         shape_str(x.shape()));
    }
    Tensor flat_x = flatten2d(x);
    for (const ExternalAttentionBlock& b : stack.blocks) {
        flat_x = attention_forward(flat_x, b);
    }
    return reshape(flat_x, x.shape());
}

int64_t external_attention_macs(int s, int L, int d) {
    // x·M_kᵀ and A·M_v, plus the two normalization passes over s×d.
    return 2ll * s * d * L + 4ll * s * d;
}

int64_t dense_self_attention_macs(int s, int L) {
    // x·xᵀ and attn·x, plus row softmax over s×s.
    return 2ll * s * s * L + 2ll * s * s;
}

namespace {

// Forward-only kernels for timing; no tape, float storage, 64-bit partials
// via the shared gemm.
void external_forward_raw(const std::vector<float>& x, const std::vector<float>& mk,
                          const std::vector<float>& mv, int s, int L, int d,
                          std::vector<float>& scratch_scores, std::vector<float>& scratch_mkt,
                          std::vector<float>& out) {
    scratch_mkt.resize(size_t(L) * d);
    transpose(mk.data(), scratch_mkt.data(), d, L);
    scratch_scores.resize(size_t(s) * d);
    gemm_nn(s, d, L, x.data(), L, scratch_mkt.data(), d, scratch_scores.data(), d, false);
    // Column softmax over s.
    for (int j = 0; j < d; ++j) {
        float mx = scratch_scores[size_t(j)];
        for (int i = 1; i < s; ++i) mx = std::max(mx, scratch_scores[size_t(i) * d + j]);
        double denom = 0.0;
        for (int i = 0; i < s; ++i) {
            const double e = std::exp(double(scratch_scores[size_t(i) * d + j]) - double(mx));
            scratch_scores[size_t(i) * d + j] = float(e);
            denom += e;
        }
        for (int i = 0; i < s; ++i) {
            scratch_scores[size_t(i) * d + j] = float(double(scratch_scores[size_t(i) * d + j]) / denom);
        }
    }
    // Row L1 over d.
    for (int i = 0; i < s; ++i) {
        double sum = 0.0;
        for (int j = 0; j < d; ++j) sum += double(scratch_scores[size_t(i) * d + j]);
        const double denom = sum + double(kAttentionL1Eps);
        for (int j = 0; j < d; ++j) {
            scratch_scores[size_t(i) * d + j] = float(double(scratch_scores[size_t(i) * d + j]) / denom);
        }
    }
    out.resize(size_t(s) * L);
    std::copy(x.begin(), x.end(), out.begin());
    gemm_nn(s, L, d, scratch_scores.data(), d, mv.data(), L, out.data(), L, true);
}

void dense_forward_raw(const std::vector<float>& x, int s, int L,
                       std::vector<float>& scratch_xt, std::vector<float>& scratch_attn,
                       std::vector<float>& out) {
    scratch_xt.resize(size_t(L) * s);
    transpose(x.data(), scratch_xt.data(), s, L);
    scratch_attn.resize(size_t(s) * s);
    gemm_nn(s, s, L, x.data(), L, scratch_xt.data(), s, scratch_attn.data(), s, false);
    for (int i = 0; i < s; ++i) {
        float* row = scratch_attn.data() + size_t(i) * s;
        float mx = row[0];
        for (int j = 1; j < s; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < s; ++j) {
            const double e = std::exp(double(row[j]) - double(mx));
            row[j] = float(e);
            denom += e;
        }
        for (int j = 0; j < s; ++j) row[j] = float(double(row[j]) / denom);
    }
    out.resize(size_t(s) * L);
    gemm_nn(s, L, s, scratch_attn.data(), s, x.data(), L, out.data(), L, false);
}

double median_us(std::vector<double>& samples) {
    std::sort(samples.begin(), samples.end());
    const size_t n = samples.size();
    return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

}  // namespace

std::vector<BenchRow> bench_attention(int s_min, int s_max, int L, int d, int repeats) {
    if (s_min < 1 || s_max < s_min || L < 1 || d < 1 || repeats < 1) {
        throw ConfigError("bench_attention: invalid range");
    }
    using clock = std::chrono::steady_clock;
    std::vector<BenchRow> rows;
    Rng rng(20240117);
    std::vector<float> sc1, sc2, out;
    for (int s = s_min; s <= s_max; s *= 2) {
        std::vector<float> x(size_t(s) * L);
        for (auto& v : x) v = float(rng.normal());
        std::vector<float> mk(size_t(d) * L), mv(size_t(d) * L);
        const double stdev = 1.0 / std::sqrt(double(L));
        for (auto& v : mk) v = float(rng.normal(0.0, stdev));
        for (auto& v : mv) v = float(rng.normal(0.0, stdev));

        external_forward_raw(x, mk, mv, s, L, d, sc1, sc2, out);  // warmup
        std::vector<double> ext_times;
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = clock::now();
            external_forward_raw(x, mk, mv, s, L, d, sc1, sc2, out);
            const auto t1 = clock::now();
            ext_times.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
        }
        rows.push_back({"external", s, L, d, median_us(ext_times)});

        dense_forward_raw(x, s, L, sc1, sc2, out);  // warmup
        std::vector<double> dense_times;
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = clock::now();
            dense_forward_raw(x, s, L, sc1, sc2, out);
            const auto t1 = clock::now();
            dense_times.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
        }
        rows.push_back({"dense", s, L, d, median_us(dense_times)});
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    os << "variant,s,L,d,median_us\n";
    for (const BenchRow& r : rows) {
        os << r.variant << "," << r.s << "," << r.L << "," << r.d << ",";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", r.median_us);
        os << buf << "\n";
    }
    return os.str();
}

}  // namespace roiattn
