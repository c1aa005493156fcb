#pragma once

#include <functional>
#include <string>

#include "subgroupte/params.hpp"

namespace subgroupte {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Compares analytic gradients against central finite differences for every
// element of every parameter. `loss` must be a pure forward evaluation;
// `backward` must leave the gradient buffers holding dL/dw (it is expected to
// zero them first). Relative error uses a 1e-4 denominator floor so that
// finite-difference noise on near-zero gradients does not register.
GradCheckReport grad_check(ParameterStore& params, const std::function<double()>& loss,
                           const std::function<void()>& backward, double fd_epsilon = 1e-5);

}  // namespace subgroupte
