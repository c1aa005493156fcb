#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "subgroupte/data.hpp"
#include "subgroupte/model.hpp"

namespace subgroupte {

struct TrainConfig {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;
    std::size_t k = 3;
    double lr = 0.001;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 200;
    std::size_t patience = 20;
    std::size_t hidden_dim = 64;
    std::optional<double> bandwidth;  // empty selects 0.1 * std(te) at centroid init
    std::uint64_t seed = 0;
    std::array<double, 3> split = {0.6, 0.2, 0.2};
    bool per_batch_estep = false;  // alternate E/M per mini-batch instead of per epoch
    EncoderSpec encoder;

    void validate() const;
};

struct LossBreakdown {
    double total = 0.0;
    double propensity = 0.0;  // binary cross-entropy on treatment assignment
    double pre = 0.0;         // factual squared error of the pre-subgrouping heads
    double post = 0.0;        // factual squared error of the subgroup-informed heads
};

struct TrainLogRecord {
    std::size_t epoch = 0;
    double loss_total = 0.0;
    double loss_propensity = 0.0;
    double loss_pre = 0.0;
    double loss_post = 0.0;
    double val_factual_mse = 0.0;
    std::vector<double> centroids;
};

// alpha * BCE(t, t_hat) + beta * mean((y - y'_fact)^2) + gamma * mean((y - y_fact)^2),
// factual arms selected by t. t_hat is clamped to [1e-7, 1 - 1e-7] inside the
// cross-entropy. Throws std::runtime_error with the term breakdown if the
// total is not finite.
LossBreakdown compute_loss(const ModelOutput& output, std::span<const int> t,
                           std::span<const double> y, const TrainConfig& cfg);

// Gradients of compute_loss with respect to the model outputs.
OutputGrads loss_grads(const ModelOutput& output, std::span<const int> t,
                       std::span<const double> y, const TrainConfig& cfg);

// One gradient step on a mini-batch: forward, loss, backward, SGD update.
// Centroids are left untouched.
LossBreakdown m_step(SubgroupTEModel& model, const Matrix& X, std::span<const int> t,
                     std::span<const double> y, const TrainConfig& cfg);

// te' = P_y1(z) - P_y0(z) for every row of X; the clustering feature space.
std::vector<double> pre_subgrouping_te(const SubgroupTEModel& model, const Matrix& X);

double factual_mse(const SubgroupTEModel& model, const Dataset& data,
                   std::span<const std::size_t> rows);

struct FitResult {
    SubgroupTEModel model;
    std::vector<TrainLogRecord> log;
    double best_val_mse = 0.0;
    SplitIndices split;
};

using LogSink = std::function<void(const TrainLogRecord&)>;

// EM training: a warm-up epoch with the subgroup term off, quantile centroid
// initialization from the warmed-up te' distribution, then per epoch an
// E-step over the train split followed by SGD mini-batch M-steps. Early stops
// on validation factual MSE and returns the best-validation model.
FitResult fit(const Dataset& data, const TrainConfig& cfg, const LogSink& sink = {});

struct EvalResult {
    double factual_mse = 0.0;
    std::optional<double> pehe;
    std::optional<double> eps_ate;
};

// Metrics on the given rows; pehe/eps_ate only when the dataset carries the
// oracle columns.
EvalResult evaluate(const SubgroupTEModel& model, const Dataset& data,
                    std::span<const std::size_t> rows);

}  // namespace subgroupte
