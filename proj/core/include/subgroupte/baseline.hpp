#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "subgroupte/data.hpp"
#include "subgroupte/matrix.hpp"

namespace subgroupte {

// Two independent ridge regressions, one per treatment arm, each with an
// unpenalized intercept. Reference point the subgroup model is measured
// against.
struct TLearner {
    std::vector<double> w0, w1;  // per-arm weights, intercept last
    double lambda = 0.0;
    bool fitted = false;

    std::size_t p() const { return fitted ? w0.size() - 1 : 0; }
};

// Closed-form fit on the factual rows of each arm. Throws
// std::invalid_argument if an arm is empty or lambda <= 0, and
// std::runtime_error if the normal equations are singular.
TLearner fit_tlearner(const Dataset& data, std::span<const std::size_t> rows, double lambda);

double predict_arm(const TLearner& m, std::span<const double> x, int arm);

// y1_hat(x) - y0_hat(x) for every row of X. Throws std::logic_error when unfitted.
std::vector<double> predict_te(const TLearner& m, const Matrix& X);

// Solves A w = b by Gaussian elimination with partial pivoting. Throws
// std::runtime_error on a singular (or numerically singular) system.
std::vector<double> solve_linear(Matrix A, std::vector<double> b);

}  // namespace subgroupte
