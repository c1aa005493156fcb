#include "subgroupte/baseline.hpp"

#include <cmath>
#include <stdexcept>

namespace subgroupte {

std::vector<double> solve_linear(Matrix A, std::vector<double> b) {
    const std::size_t n = A.rows();
    if (A.cols() != n || b.size() != n)
        throw std::invalid_argument("solve_linear: need square system, got " + A.shape_str());

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(A(r, col)) > std::fabs(A(pivot, col))) pivot = r;
        if (std::fabs(A(pivot, col)) < 1e-12)
            throw std::runtime_error(
                "solve_linear: singular normal equations; increase lambda");
        if (pivot != col) {
            for (std::size_t c = col; c < n; ++c) std::swap(A(col, c), A(pivot, c));
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = A(r, col) / A(col, col);
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) A(r, c) -= f * A(col, c);
            b[r] -= f * b[col];
        }
    }

    std::vector<double> w(n);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t c = i + 1; c < n; ++c) acc -= A(i, c) * w[c];
        w[i] = acc / A(i, i);
    }
    return w;
}

namespace {

// Ridge with intercept appended as an extra all-ones column; the intercept
// coordinate is left out of the penalty.
std::vector<double> fit_arm(const Dataset& data, std::span<const std::size_t> rows, int arm,
                            double lambda) {
    const std::size_t p = data.p;
    std::vector<std::size_t> keep;
    for (std::size_t r : rows)
        if (data.t[r] == arm) keep.push_back(r);
    if (keep.empty())
        throw std::invalid_argument("fit_tlearner: no samples with t=" + std::to_string(arm));

    const std::size_t d = p + 1;
    Matrix ata(d, d);
    std::vector<double> aty(d, 0.0);
    for (std::size_t r : keep) {
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = i < p ? data.covariate(r, i) : 1.0;
            aty[i] += xi * data.y[r];
            for (std::size_t j = i; j < d; ++j) {
                const double xj = j < p ? data.covariate(r, j) : 1.0;
                ata(i, j) += xi * xj;
            }
        }
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j) ata(i, j) = ata(j, i);
    for (std::size_t i = 0; i < p; ++i) ata(i, i) += lambda;

    return solve_linear(std::move(ata), std::move(aty));
}

}  // namespace

TLearner fit_tlearner(const Dataset& data, std::span<const std::size_t> rows, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("fit_tlearner: lambda must be finite and > 0");
    if (rows.empty()) throw std::invalid_argument("fit_tlearner: no training rows");

    TLearner m;
    m.lambda = lambda;
    m.w0 = fit_arm(data, rows, 0, lambda);
    m.w1 = fit_arm(data, rows, 1, lambda);
    m.fitted = true;
    return m;
}

double predict_arm(const TLearner& m, std::span<const double> x, int arm) {
    if (!m.fitted) throw std::logic_error("predict_arm: model not fitted");
    const std::vector<double>& w = arm == 1 ? m.w1 : m.w0;
    if (x.size() + 1 != w.size())
        throw std::invalid_argument("predict_arm: expected " + std::to_string(w.size() - 1) +
                                    " covariates, got " + std::to_string(x.size()));
    double acc = w.back();
    for (std::size_t j = 0; j < x.size(); ++j) acc += w[j] * x[j];
    return acc;
}

std::vector<double> predict_te(const TLearner& m, const Matrix& X) {
    if (!m.fitted) throw std::logic_error("predict_te: model not fitted");
    std::vector<double> te(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const auto x = X.row(i);
        te[i] = predict_arm(m, x, 1) - predict_arm(m, x, 0);
    }
    return te;
}

}  // namespace subgroupte
