#include "subgroupte/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "subgroupte/metrics.hpp"
#include "subgroupte/rng.hpp"

namespace subgroupte {

namespace {

constexpr double kProbClamp = 1e-7;

std::vector<int> gather_t(const Dataset& d, std::span<const std::size_t> rows) {
    std::vector<int> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = d.t[rows[i]];
    return out;
}

std::vector<double> gather_y(const Dataset& d, std::span<const std::size_t> rows) {
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = d.y[rows[i]];
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(alpha) || !in_unit(beta) || !in_unit(gamma))
        throw std::invalid_argument("TrainConfig: alpha, beta, gamma must lie in [0, 1]");
    if (k == 0) throw std::invalid_argument("TrainConfig: k must be >= 1");
    if (!(lr >= 0.0) || !std::isfinite(lr))
        throw std::invalid_argument("TrainConfig: lr must be finite and >= 0");
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (hidden_dim == 0) throw std::invalid_argument("TrainConfig: hidden_dim must be >= 1");
    if (bandwidth && !(*bandwidth > 0.0))
        throw std::invalid_argument("TrainConfig: fixed bandwidth must be > 0");
    const double s = split[0] + split[1] + split[2];
    if (std::fabs(s - 1.0) > 1e-9)
        throw std::invalid_argument("TrainConfig: split fractions must sum to 1");
}

LossBreakdown compute_loss(const ModelOutput& output, std::span<const int> t,
                           std::span<const double> y, const TrainConfig& cfg) {
    const std::size_t n = y.size();
    if (t.size() != n || output.t_hat.size() != n)
        throw std::invalid_argument("compute_loss: batch size mismatch");
    if (n == 0) throw std::invalid_argument("compute_loss: empty batch");

    LossBreakdown b;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = std::clamp(output.t_hat[i], kProbClamp, 1.0 - kProbClamp);
        b.propensity += t[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
        const double pre_fact = t[i] == 1 ? output.y1_pre[i] : output.y0_pre[i];
        const double post_fact = t[i] == 1 ? output.y1[i] : output.y0[i];
        b.pre += (y[i] - pre_fact) * (y[i] - pre_fact);
        b.post += (y[i] - post_fact) * (y[i] - post_fact);
    }
    const auto dn = static_cast<double>(n);
    b.propensity /= dn;
    b.pre /= dn;
    b.post /= dn;
    b.total = cfg.alpha * b.propensity + cfg.beta * b.pre + cfg.gamma * b.post;

    if (!std::isfinite(b.total)) {
        std::ostringstream msg;
        msg << "compute_loss: non-finite loss (propensity=" << b.propensity << ", pre=" << b.pre
            << ", post=" << b.post << ")";
        throw std::runtime_error(msg.str());
    }
    return b;
}

OutputGrads loss_grads(const ModelOutput& output, std::span<const int> t,
                       std::span<const double> y, const TrainConfig& cfg) {
    const std::size_t n = y.size();
    OutputGrads g;
    g.d_y0.assign(n, 0.0);
    g.d_y1.assign(n, 0.0);
    g.d_t_hat.assign(n, 0.0);
    g.d_y0_pre.assign(n, 0.0);
    g.d_y1_pre.assign(n, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);

    for (std::size_t i = 0; i < n; ++i) {
        const double p = output.t_hat[i];
        if (p > kProbClamp && p < 1.0 - kProbClamp)
            g.d_t_hat[i] = cfg.alpha * inv_n * (p - static_cast<double>(t[i])) / (p * (1.0 - p));
        if (t[i] == 1) {
            g.d_y1[i] = cfg.gamma * inv_n * 2.0 * (output.y1[i] - y[i]);
            g.d_y1_pre[i] = cfg.beta * inv_n * 2.0 * (output.y1_pre[i] - y[i]);
        } else {
            g.d_y0[i] = cfg.gamma * inv_n * 2.0 * (output.y0[i] - y[i]);
            g.d_y0_pre[i] = cfg.beta * inv_n * 2.0 * (output.y0_pre[i] - y[i]);
        }
    }
    return g;
}

LossBreakdown m_step(SubgroupTEModel& model, const Matrix& X, std::span<const int> t,
                     std::span<const double> y, const TrainConfig& cfg) {
    ForwardCache cache;
    const ModelOutput out = forward_full(model, X, cache);
    const LossBreakdown loss = compute_loss(out, t, y, cfg);
    const OutputGrads grads = loss_grads(out, t, y, cfg);
    backward_full(model, cache, grads);
    model.params.sgd_update(cfg.lr);
    return loss;
}

std::vector<double> pre_subgrouping_te(const SubgroupTEModel& model, const Matrix& X) {
    ForwardCache cache;
    const Matrix z = represent(model, X, cache);
    std::vector<double> y0p, y1p, te;
    pre_estimate(model, z, cache, y0p, y1p, te);
    return te;
}

double factual_mse(const SubgroupTEModel& model, const Dataset& data,
                   std::span<const std::size_t> rows) {
    if (rows.empty()) throw std::invalid_argument("factual_mse: no rows");
    ForwardCache cache;
    const ModelOutput out = forward_full(model, data.covariates(rows), cache);
    double sum = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double pred = data.t[rows[i]] == 1 ? out.y1[i] : out.y0[i];
        const double d = data.y[rows[i]] - pred;
        sum += d * d;
    }
    return sum / static_cast<double>(rows.size());
}

namespace {

struct Snapshot {
    ParameterStore params;
    Centroids centroids;
};

double init_bandwidth_or_auto(const TrainConfig& cfg) { return cfg.bandwidth ? *cfg.bandwidth : -1.0; }

}  // namespace

FitResult fit(const Dataset& data, const TrainConfig& cfg, const LogSink& sink) {
    cfg.validate();
    data.validate();
    if (data.n < 10 * cfg.k)
        throw std::invalid_argument("fit: need at least 10*K samples, got " +
                                    std::to_string(data.n));

    FitResult result;
    result.split = split_dataset(data.n, cfg.split, derive_seed(cfg.seed, 0));
    const auto& train_rows = result.split.train;
    const auto& val_rows = result.split.val;
    if (train_rows.size() < cfg.k)
        throw std::invalid_argument("fit: train split smaller than K");
    if (val_rows.empty()) throw std::invalid_argument("fit: empty validation split");

    NetSpec spec;
    spec.input_dim = data.p;
    spec.hidden_dim = cfg.hidden_dim;
    spec.encoder = cfg.encoder;
    SubgroupTEModel model = SubgroupTEModel::create(spec, cfg.k, derive_seed(cfg.seed, 1));

    const Matrix x_train = data.covariates(train_rows);
    const std::vector<int> t_train = gather_t(data, train_rows);
    const std::vector<double> y_train = gather_y(data, train_rows);

    if (cfg.max_epochs == 0) {
        model.set_centroids(
            init_centroids(pre_subgrouping_te(model, x_train), cfg.k, init_bandwidth_or_auto(cfg)));
        result.best_val_mse = factual_mse(model, data, val_rows);
        result.model = std::move(model);
        return result;
    }

    Rng shuffle_rng = make_rng(derive_seed(cfg.seed, 2));
    std::vector<std::size_t> order(train_rows.size());
    std::iota(order.begin(), order.end(), 0);

    double best_val = std::numeric_limits<double>::infinity();
    Snapshot best;
    std::size_t since_improve = 0;

    auto run_epoch = [&](std::size_t epoch, bool warmup) {
        TrainConfig step_cfg = cfg;
        if (warmup) step_cfg.gamma = 0.0;

        std::shuffle(order.begin(), order.end(), shuffle_rng);
        LossBreakdown sums;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, order.size());
            const std::size_t bn = stop - start;
            Matrix xb(bn, data.p);
            std::vector<int> tb(bn);
            std::vector<double> yb(bn);
            for (std::size_t i = 0; i < bn; ++i) {
                const std::size_t r = order[start + i];
                for (std::size_t j = 0; j < data.p; ++j) xb(i, j) = x_train(r, j);
                tb[i] = t_train[r];
                yb[i] = y_train[r];
            }
            if (!warmup && cfg.per_batch_estep) {
                const std::vector<double> te_b = pre_subgrouping_te(model, xb);
                model.set_centroids(e_step(model.centroids, te_b));
            }
            const LossBreakdown l = m_step(model, xb, tb, yb, step_cfg);
            sums.total += l.total * static_cast<double>(bn);
            sums.propensity += l.propensity * static_cast<double>(bn);
            sums.pre += l.pre * static_cast<double>(bn);
            sums.post += l.post * static_cast<double>(bn);
            seen += bn;
        }

        if (warmup)
            model.set_centroids(init_centroids(pre_subgrouping_te(model, x_train), cfg.k,
                                               init_bandwidth_or_auto(cfg)));

        TrainLogRecord rec;
        rec.epoch = epoch;
        const auto dn = static_cast<double>(seen);
        rec.loss_total = sums.total / dn;
        rec.loss_propensity = sums.propensity / dn;
        rec.loss_pre = sums.pre / dn;
        rec.loss_post = sums.post / dn;
        rec.val_factual_mse = factual_mse(model, data, val_rows);
        rec.centroids = model.centroids.mu;
        result.log.push_back(rec);
        if (sink) sink(rec);

        if (rec.val_factual_mse < best_val) {
            best_val = rec.val_factual_mse;
            best.params = model.params;
            best.centroids = model.centroids;
            since_improve = 0;
        } else {
            ++since_improve;
        }
    };

    // warm-up epoch: uniform subgroup probabilities (all-equal placeholder
    // centroids), subgroup-informed outcome term off
    model.set_centroids(Centroids{std::vector<double>(cfg.k, 0.0), 1.0});
    run_epoch(1, true);

    for (std::size_t epoch = 2; epoch <= cfg.max_epochs; ++epoch) {
        if (since_improve >= cfg.patience) break;
        if (!cfg.per_batch_estep)
            model.set_centroids(e_step(model.centroids, pre_subgrouping_te(model, x_train)));
        run_epoch(epoch, false);
    }

    model.params = std::move(best.params);
    model.set_centroids(std::move(best.centroids));
    result.best_val_mse = best_val;
    result.model = std::move(model);
    return result;
}

EvalResult evaluate(const SubgroupTEModel& model, const Dataset& data,
                    std::span<const std::size_t> rows) {
    EvalResult res;
    res.factual_mse = factual_mse(model, data, rows);
    if (!data.has_oracle) return res;

    ForwardCache cache;
    const ModelOutput out = forward_full(model, data.covariates(rows), cache);
    std::vector<double> te_hat(rows.size()), te_true(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        te_hat[i] = out.y1[i] - out.y0[i];
        te_true[i] = data.te[rows[i]];
    }
    res.pehe = pehe(te_hat, te_true);
    res.eps_ate = eps_ate(out.y1, out.y0, te_true);
    return res;
}

}  // namespace subgroupte
