#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "subgroupte/matrix.hpp"
#include "subgroupte/rng.hpp"

namespace testutil {

using subgroupte::Matrix;
using subgroupte::Rng;

inline void fill_uniform(Matrix& m, Rng& rng, double lo = -1.0, double hi = 1.0) {
    for (std::size_t i = 0; i < m.rows() * m.cols(); ++i)
        m.at_flat(i) = subgroupte::uniform_in(rng, lo, hi);
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
    Matrix m(rows, cols);
    fill_uniform(m, rng, lo, hi);
    return m;
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = -1.0,
                                         double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = subgroupte::uniform_in(rng, lo, hi);
    return v;
}

inline std::vector<std::size_t> iota_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

// same floor convention as the finite-difference reports: errors on
// near-zero gradient pairs do not register
inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-4});
    return std::fabs(analytic - numeric) / denom;
}

}  // namespace testutil
