#include "subgroupte/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "subgroupte/rng.hpp"

namespace subgroupte {

Matrix Dataset::covariates(std::span<const std::size_t> rows) const {
    Matrix m(rows.size(), p);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < p; ++j) m(r, j) = covariate(rows[r], j);
    return m;
}

void Dataset::validate() const {
    if (x.size() != n * p || t.size() != n || y.size() != n)
        throw std::invalid_argument("Dataset: inconsistent field lengths");
    if (has_oracle && (y0.size() != n || y1.size() != n || te.size() != n))
        throw std::invalid_argument("Dataset: oracle columns have wrong length");
    for (std::size_t i = 0; i < n; ++i) {
        if (t[i] != 0 && t[i] != 1)
            throw std::invalid_argument("Dataset: treatment must be 0 or 1 at row " +
                                        std::to_string(i + 1));
        if (!std::isfinite(y[i]))
            throw std::invalid_argument("Dataset: non-finite outcome at row " +
                                        std::to_string(i + 1));
    }
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite covariate");
}

SplitIndices split_dataset(std::size_t n, const std::array<double, 3>& fractions,
                           std::uint64_t seed) {
    const double sum = fractions[0] + fractions[1] + fractions[2];
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n)));
    if (n_train + n_val > n) throw std::invalid_argument("split fractions overflow dataset");

    SplitIndices s;
    s.train.assign(idx.begin(), idx.begin() + n_train);
    s.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    s.test.assign(idx.begin() + n_train + n_val, idx.end());
    return s;
}

}  // namespace subgroupte
