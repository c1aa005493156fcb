#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <span>
#include <vector>

#include "subgroupte/matrix.hpp"

namespace subgroupte {

// Observational rows: covariates, binary treatment, factual outcome.
// Synthetic datasets additionally carry both potential outcomes and the
// conditional-mean treatment effect (the oracle columns).
struct Dataset {
    std::size_t n = 0;
    std::size_t p = 0;
    std::vector<std::int64_t> id;
    std::vector<double> x;  // n x p row-major
    std::vector<int> t;     // 0/1
    std::vector<double> y;
    bool has_oracle = false;
    std::vector<double> y0, y1, te;

    double covariate(std::size_t i, std::size_t j) const { return x[i * p + j]; }

    // Covariate matrix for the given rows, in the given order.
    Matrix covariates(std::span<const std::size_t> rows) const;

    void validate() const;  // shapes, t in {0,1}, finite values
};

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

// Deterministic shuffle-then-cut split. Fractions must sum to 1.
SplitIndices split_dataset(std::size_t n, const std::array<double, 3>& fractions,
                           std::uint64_t seed);

}  // namespace subgroupte
