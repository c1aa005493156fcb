#include "subgroupte/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace subgroupte {

namespace {

Matrix column_from(const std::vector<double>& v) {
    Matrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
}

std::vector<double> to_vector(const Matrix& column) {
    if (column.cols() != 1) throw std::logic_error("expected a column matrix");
    std::vector<double> v(column.rows());
    for (std::size_t i = 0; i < column.rows(); ++i) v[i] = column(i, 0);
    return v;
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void ModelOutput::validate() const {
    const std::size_t n = z.rows();
    if (y0_pre.size() != n || y1_pre.size() != n || te_pre.size() != n || y0.size() != n ||
        y1.size() != n || t_hat.size() != n || v.rows() != n)
        throw std::logic_error("ModelOutput: inconsistent batch sizes");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(y0_pre[i]) || !std::isfinite(y1_pre[i]) || !std::isfinite(y0[i]) ||
            !std::isfinite(y1[i]) || !std::isfinite(t_hat[i]))
            throw std::runtime_error("ModelOutput: non-finite prediction (diverged?)");
        if (te_pre[i] != y1_pre[i] - y0_pre[i])
            throw std::logic_error("ModelOutput: te_pre != y1_pre - y0_pre");
        if (!(t_hat[i] >= 0.0 && t_hat[i] <= 1.0))
            throw std::logic_error("ModelOutput: t_hat outside [0,1]");
        double row_sum = 0.0;
        for (std::size_t k = 0; k < v.cols(); ++k) {
            const double p = v(i, k);
            if (p < 0.0 || p > 1.0) throw std::logic_error("ModelOutput: v outside [0,1]");
            row_sum += p;
        }
        if (std::fabs(row_sum - 1.0) > 1e-9)
            throw std::logic_error("ModelOutput: v row does not sum to 1");
    }
}

SubgroupTEModel SubgroupTEModel::create(const NetSpec& spec, std::size_t K, std::uint64_t seed) {
    spec.validate();
    if (K == 0) throw std::invalid_argument("SubgroupTEModel: K must be >= 1");

    SubgroupTEModel m;
    m.spec = spec;
    m.K = K;
    Rng rng = make_rng(seed);

    const std::size_t p = spec.input_dim;
    const std::size_t hidden = spec.hidden_dim;
    if (spec.encoder.use_encoder) {
        const std::size_t d = spec.encoder.token_dim;
        Matrix& ew = m.params.add("emb.w", p, d);
        Matrix& eb = m.params.add("emb.b", p, d);
        const double bound = std::sqrt(1.0 / static_cast<double>(d));
        for (std::size_t i = 0; i < ew.size(); ++i) ew.at_flat(i) = uniform_in(rng, -bound, bound);
        for (std::size_t i = 0; i < eb.size(); ++i) eb.at_flat(i) = uniform_in(rng, -bound, bound);
        add_encoder(m.params, spec, rng);
        add_dense(m.params, "proj", d, hidden, Activation::identity, rng);
    } else {
        add_dense(m.params, "mlp.l1", p, hidden, Activation::relu, rng);
        add_dense(m.params, "mlp.l2", hidden, hidden, Activation::identity, rng);
    }

    add_dense(m.params, "p0", hidden, 1, Activation::identity, rng);
    add_dense(m.params, "p1", hidden, 1, Activation::identity, rng);

    const std::size_t u_dim = hidden + K;
    for (const char* head : {"f0", "f1", "ft"}) {
        add_dense(m.params, std::string(head) + ".l1", u_dim, hidden, Activation::relu, rng);
        add_dense(m.params, std::string(head) + ".l2", hidden, 1,
                  std::string(head) == "ft" ? Activation::sigmoid : Activation::identity, rng);
    }
    return m;
}

void SubgroupTEModel::set_centroids(Centroids c) {
    c.validate();
    if (c.k() != K)
        throw std::invalid_argument("set_centroids: expected " + std::to_string(K) +
                                    " centroids, got " + std::to_string(c.k()));
    centroids = std::move(c);
    centroids_ready = true;
}

Matrix represent(const SubgroupTEModel& model, const Matrix& X, ForwardCache& cache) {
    const NetSpec& spec = model.spec;
    if (X.cols() != spec.input_dim)
        throw std::invalid_argument("represent: expected " + std::to_string(spec.input_dim) +
                                    " covariates, got " + std::to_string(X.cols()));

    if (!spec.encoder.use_encoder) {
        Matrix h = dense_forward(model.params, "mlp.l1", X, Activation::relu, cache.mlp1);
        return dense_forward(model.params, "mlp.l2", h, Activation::identity, cache.mlp2);
    }

    const std::size_t d = spec.encoder.token_dim;
    const std::size_t p = spec.input_dim;
    const Matrix& ew = model.params.value("emb.w");
    const Matrix& eb = model.params.value("emb.b");

    cache.x_input = X;
    cache.tokens.resize(X.rows());
    for (std::size_t s = 0; s < X.rows(); ++s) {
        Matrix tok(p, d);
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t c = 0; c < d; ++c) tok(j, c) = X(s, j) * ew(j, c) + eb(j, c);
        cache.tokens[s] = std::move(tok);
    }

    TokenBatch encoded = encoder_forward(model.params, spec, cache.tokens, cache.enc);

    cache.pooled = Matrix(X.rows(), d);
    const double inv_p = 1.0 / static_cast<double>(p);
    for (std::size_t s = 0; s < encoded.size(); ++s)
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t c = 0; c < d; ++c) cache.pooled(s, c) += encoded[s](j, c) * inv_p;

    return dense_forward(model.params, "proj", cache.pooled, Activation::identity, cache.proj);
}

void pre_estimate(const SubgroupTEModel& model, const Matrix& Z, ForwardCache& cache,
                  std::vector<double>& y0_pre, std::vector<double>& y1_pre,
                  std::vector<double>& te_pre) {
    y0_pre = to_vector(dense_forward(model.params, "p0", Z, Activation::identity, cache.p0));
    y1_pre = to_vector(dense_forward(model.params, "p1", Z, Activation::identity, cache.p1));
    te_pre.resize(y0_pre.size());
    for (std::size_t i = 0; i < te_pre.size(); ++i) te_pre[i] = y1_pre[i] - y0_pre[i];
    cache.te_pre = te_pre;
}

Matrix subgroup_probs(std::span<const double> te_pre, const Centroids& centroids) {
    centroids.validate();
    const std::size_t K = centroids.k();
    Matrix v(te_pre.size(), K);
    for (std::size_t i = 0; i < te_pre.size(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
            v(i, k) = -std::fabs(te_pre[i] - centroids.mu[k]);
            mx = std::max(mx, v(i, k));
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            v(i, k) = std::exp(v(i, k) - mx);
            sum += v(i, k);
        }
        for (std::size_t k = 0; k < K; ++k) v(i, k) /= sum;
    }
    return v;
}

void predict_heads(const SubgroupTEModel& model, const Matrix& Z, const Matrix& V,
                   ForwardCache& cache, std::vector<double>& y0, std::vector<double>& y1,
                   std::vector<double>& t_hat) {
    if (V.rows() != Z.rows())
        throw std::invalid_argument("predict_heads: Z and V batch sizes differ");
    for (std::size_t i = 0; i < V.rows(); ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < V.cols(); ++k) s += V(i, k);
        if (std::fabs(s - 1.0) > 1e-6)
            throw std::invalid_argument("predict_heads: V row " + std::to_string(i) +
                                        " does not sum to 1");
    }

    cache.u = hcat(Z, V);
    Matrix h0 = dense_forward(model.params, "f0.l1", cache.u, Activation::relu, cache.f0_l1);
    y0 = to_vector(dense_forward(model.params, "f0.l2", h0, Activation::identity, cache.f0_l2));
    Matrix h1 = dense_forward(model.params, "f1.l1", cache.u, Activation::relu, cache.f1_l1);
    y1 = to_vector(dense_forward(model.params, "f1.l2", h1, Activation::identity, cache.f1_l2));
    Matrix ht = dense_forward(model.params, "ft.l1", cache.u, Activation::relu, cache.ft_l1);
    t_hat = to_vector(dense_forward(model.params, "ft.l2", ht, Activation::sigmoid, cache.ft_l2));
}

ModelOutput forward_full(const SubgroupTEModel& model, const Matrix& X, ForwardCache& cache) {
    if (!model.centroids_ready)
        throw std::logic_error("forward_full: centroids not initialized");

    ModelOutput out;
    out.z = represent(model, X, cache);
    pre_estimate(model, out.z, cache, out.y0_pre, out.y1_pre, out.te_pre);
    out.v = subgroup_probs(out.te_pre, model.centroids);
    cache.v = out.v;
    predict_heads(model, out.z, out.v, cache, out.y0, out.y1, out.t_hat);
    out.validate();
    return out;
}

void backward_full(SubgroupTEModel& model, const ForwardCache& cache, const OutputGrads& grads) {
    ParameterStore& params = model.params;
    const std::size_t n = cache.te_pre.size();
    const std::size_t hidden = model.spec.hidden_dim;
    const std::size_t K = model.K;

    // subgroup-informed heads
    Matrix du(n, hidden + K);
    {
        Matrix dh = dense_backward(params, cache.f0_l2, column_from(grads.d_y0));
        add_inplace(du, dense_backward(params, cache.f0_l1, dh));
        dh = dense_backward(params, cache.f1_l2, column_from(grads.d_y1));
        add_inplace(du, dense_backward(params, cache.f1_l1, dh));
        dh = dense_backward(params, cache.ft_l2, column_from(grads.d_t_hat));
        add_inplace(du, dense_backward(params, cache.ft_l1, dh));
    }

    Matrix dz(n, hidden);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < hidden; ++j) dz(i, j) = du(i, j);

    // chain through v: softmax over negative absolute distances, centroids constant
    std::vector<double> d_te(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t k = 0; k < K; ++k) dot += du(i, hidden + k) * cache.v(i, k);
        for (std::size_t k = 0; k < K; ++k) {
            const double ds = cache.v(i, k) * (du(i, hidden + k) - dot);
            d_te[i] += ds * (-sign_of(cache.te_pre[i] - model.centroids.mu[k]));
        }
    }

    std::vector<double> d_y1_pre(n), d_y0_pre(n);
    for (std::size_t i = 0; i < n; ++i) {
        d_y1_pre[i] = grads.d_y1_pre[i] + d_te[i];
        d_y0_pre[i] = grads.d_y0_pre[i] - d_te[i];
    }
    add_inplace(dz, dense_backward(params, cache.p1, column_from(d_y1_pre)));
    add_inplace(dz, dense_backward(params, cache.p0, column_from(d_y0_pre)));

    // representation
    if (!model.spec.encoder.use_encoder) {
        Matrix dh = dense_backward(params, cache.mlp2, dz);
        dense_backward(params, cache.mlp1, dh);
        return;
    }

    Matrix dpooled = dense_backward(params, cache.proj, dz);
    const std::size_t p = model.spec.input_dim;
    const std::size_t d = model.spec.encoder.token_dim;
    const double inv_p = 1.0 / static_cast<double>(p);
    TokenBatch denc(n);
    for (std::size_t s = 0; s < n; ++s) {
        Matrix g(p, d);
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t c = 0; c < d; ++c) g(j, c) = dpooled(s, c) * inv_p;
        denc[s] = std::move(g);
    }

    TokenBatch dtokens = encoder_backward(params, model.spec, cache.enc, denc);

    // token row j of sample s was x_{s,j} * emb.w[j] + emb.b[j]
    Matrix& dew = params.grad("emb.w");
    Matrix& deb = params.grad("emb.b");
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t j = 0; j < p; ++j) {
            const double xsj = cache.x_input(s, j);
            for (std::size_t c = 0; c < d; ++c) {
                dew(j, c) += xsj * dtokens[s](j, c);
                deb(j, c) += dtokens[s](j, c);
            }
        }
    }
}

}  // namespace subgroupte
