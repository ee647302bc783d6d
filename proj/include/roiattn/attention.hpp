#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roiattn/checkpoint.hpp"
#include "roiattn/tensor.hpp"

namespace roiattn {

// External attention over the RoIs of one image. Instead of an s×s
// token-to-token map, scores are taken against two small learnable
// memories, so cost is linear in the RoI count s.
//
// key_memory and value_memory are both d×L where L is the flattened RoI
// feature length; the attention map is DNorm(x · key_memoryᵀ) ∈ s×d and
// the output is map · value_memory + x.
struct ExternalAttentionBlock {
    Tensor key_memory;    // d×L
    Tensor value_memory;  // d×L
    int d = 0;
    int L = 0;

    // Memories drawn from N(0, 1/sqrt(L)) so pre-normalization scores stay
    // at unit order.
    static ExternalAttentionBlock init(int d, int L, Rng& rng);
};

struct RoiAttentionStack {
    std::vector<ExternalAttentionBlock> blocks;

    int depth() const { return int(blocks.size()); }
    int feature_length() const { return blocks.empty() ? 0 : blocks[0].L; }

    static RoiAttentionStack init(int depth, int d, int L, Rng& rng);

    void collect_params(std::vector<NamedParam>& out, const std::string& prefix) const;
};

// Softmax over the RoI axis (columns each sum to 1), then L1 over the
// memory axis with eps = 1e-9 (rows each sum to ~1).
Tensor double_normalize(const Tensor& scores);

// DNorm(x · key_memoryᵀ) ∈ s×d; every entry in [0, 1].
Tensor attention_scores(const Tensor& x, const ExternalAttentionBlock& block);

// attention_scores(x) · value_memory + x; shape-preserving.
Tensor attention_forward(const Tensor& x, const ExternalAttentionBlock& block);

// Flattens s×c×h×w to s×L, applies the blocks in order, reshapes back.
// A depth-0 stack is the identity.
Tensor stack_forward(const Tensor& x, const RoiAttentionStack& stack);

constexpr float kAttentionL1Eps = 1e-9f;

// Analytic per-call multiply-accumulate counts backing the complexity
// claims: external attention is linear in s, dense self-attention carries
// an s² term.
int64_t external_attention_macs(int s, int L, int d);
int64_t dense_self_attention_macs(int s, int L);

struct BenchRow {
    std::string variant;  // "external" or "dense"
    int s = 0;
    int L = 0;
    int d = 0;
    double median_us = 0.0;
};

// Times external attention against a naive dense s×s self-attention
// (softmax(X·Xᵀ)·X) for s = s_min, 2·s_min, ..., up to s_max.
// Wall-clock medians over `repeats` calls, forward only, no tape.
std::vector<BenchRow> bench_attention(int s_min, int s_max, int L, int d, int repeats);

// UTF-8 lines "variant,s,L,d,median_us" with a header row.
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace roiattn
