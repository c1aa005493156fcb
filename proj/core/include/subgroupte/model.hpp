#pragma once

#include <cstdint>
#include <vector>

#include "subgroupte/encoder.hpp"
#include "subgroupte/layers.hpp"
#include "subgroupte/matrix.hpp"
#include "subgroupte/netspec.hpp"
#include "subgroupte/params.hpp"
#include "subgroupte/subgroup.hpp"

namespace subgroupte {

// Batch outputs of the full pipeline. te_pre is y1_pre - y0_pre by
// construction; each row of v lies on the probability simplex.
struct ModelOutput {
    Matrix z;
    std::vector<double> y0_pre, y1_pre, te_pre;
    Matrix v;
    std::vector<double> y0, y1, t_hat;

    void validate() const;
};

// Everything backward_full needs, produced by one forward_full call.
struct ForwardCache {
    // representation
    Matrix x_input;
    TokenBatch tokens;
    EncoderCache enc;
    Matrix pooled;
    DenseCache proj;
    DenseCache mlp1, mlp2;
    // pre-estimation heads
    DenseCache p0, p1;
    // subgrouping
    std::vector<double> te_pre;
    Matrix v;
    // subgroup-informed heads
    Matrix u;
    DenseCache f0_l1, f0_l2, f1_l1, f1_l2, ft_l1, ft_l2;
};

struct SubgroupTEModel {
    NetSpec spec;
    std::size_t K = 1;
    ParameterStore params;
    Centroids centroids;
    bool centroids_ready = false;

    static SubgroupTEModel create(const NetSpec& spec, std::size_t K, std::uint64_t seed);

    void set_centroids(Centroids c);
};

// Feature representation: per-feature value-scaled token embeddings through
// the attention block, mean-pooled and projected to hidden_dim. With the
// encoder disabled, a two-layer relu MLP on the raw covariates.
Matrix represent(const SubgroupTEModel& model, const Matrix& X, ForwardCache& cache);

// One-layer linear heads; te_pre = y1_pre - y0_pre elementwise.
void pre_estimate(const SubgroupTEModel& model, const Matrix& Z, ForwardCache& cache,
                  std::vector<double>& y0_pre, std::vector<double>& y1_pre,
                  std::vector<double>& te_pre);

// v_{i,k} = softmax_k(-|te_i - mu_k|), computed with max subtraction.
Matrix subgroup_probs(std::span<const double> te_pre, const Centroids& centroids);

// Two-layer relu heads on concat(z, v); the treatment head ends in a sigmoid.
void predict_heads(const SubgroupTEModel& model, const Matrix& Z, const Matrix& V,
                   ForwardCache& cache, std::vector<double>& y0, std::vector<double>& y1,
                   std::vector<double>& t_hat);

ModelOutput forward_full(const SubgroupTEModel& model, const Matrix& X, ForwardCache& cache);

// Loss gradients with respect to the model outputs; the v-path contribution
// to the pre-estimation heads is added inside backward_full.
struct OutputGrads {
    std::vector<double> d_y0, d_y1, d_t_hat;
    std::vector<double> d_y0_pre, d_y1_pre;
};

// Accumulates parameter gradients for the whole pipeline. Centroids receive
// no gradient; the chain through v treats them as constants.
void backward_full(SubgroupTEModel& model, const ForwardCache& cache, const OutputGrads& grads);

}  // namespace subgroupte
