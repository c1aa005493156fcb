#pragma once

#include <vector>

#include "subgroupte/matrix.hpp"
#include "subgroupte/netspec.hpp"
#include "subgroupte/params.hpp"
#include "subgroupte/rng.hpp"

namespace subgroupte {

// One token matrix (p x token_dim) per sample.
using TokenBatch = std::vector<Matrix>;

// Per-sample activations of the attention block, kept for backward.
struct EncoderCache {
    std::vector<Matrix> x;                   // input tokens
    std::vector<Matrix> q, k, v;             // projections, heads packed in columns
    std::vector<std::vector<Matrix>> attn;   // [sample][head], p x p row-stochastic
    std::vector<Matrix> attn_out;            // concatenated head outputs, before the out projection
    std::vector<Matrix> x1;                  // after the attention residual
    std::vector<Matrix> ffn_pre;             // feedforward pre-activation
};

// Registers the block's parameters under "enc.*".
void add_encoder(ParameterStore& params, const NetSpec& spec, Rng& rng);

// One block of multi-head self-attention plus a position-wise feedforward,
// each with a residual connection. Deterministic given params and tokens.
TokenBatch encoder_forward(const ParameterStore& params, const NetSpec& spec,
                           const TokenBatch& tokens, EncoderCache& cache);

// Accumulates parameter gradients; returns dL/dtokens.
TokenBatch encoder_backward(ParameterStore& params, const NetSpec& spec, const EncoderCache& cache,
                            const TokenBatch& grad_out);

}  // namespace subgroupte
