#include "subgroupte/gradcheck.hpp"

#include <cmath>
#include <map>

namespace subgroupte {

GradCheckReport grad_check(ParameterStore& params, const std::function<double()>& loss,
                           const std::function<void()>& backward, double fd_epsilon) {
    backward();
    std::map<std::string, Matrix> analytic;
    for (const auto& name : params.names()) analytic.emplace(name, params.grad(name));

    GradCheckReport report;
    for (const auto& name : params.names()) {
        Matrix& w = params.value(name);
        const Matrix& a = analytic.at(name);
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double saved = w.at_flat(i);
            w.at_flat(i) = saved + fd_epsilon;
            const double lp = loss();
            w.at_flat(i) = saved - fd_epsilon;
            const double lm = loss();
            w.at_flat(i) = saved;

            const double numeric = (lp - lm) / (2.0 * fd_epsilon);
            const double ai = a.at_flat(i);
            const double denom = std::max({std::fabs(ai), std::fabs(numeric), 1e-4});
            const double rel = std::fabs(ai - numeric) / denom;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = name;
                report.worst_index = i;
                report.worst_analytic = ai;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace subgroupte
