#include "d2dpa/optim.hpp"

#include <cmath>

namespace d2dpa {

GradCheckReport grad_check(const LossClosure& closure, const std::vector<Tensor*>& params,
                           const std::vector<std::string>& names, double fd_step) {
    if (names.size() != params.size())
        throw std::invalid_argument("grad_check: names/params size mismatch");

    // determinism probe: two evaluations must agree bitwise
    double l0 = closure(params, nullptr);
    double l1 = closure(params, nullptr);
    if (l0 != l1) throw std::runtime_error("grad_check: closure is not deterministic");

    std::vector<Tensor> analytic;
    closure(params, &analytic);
    if (analytic.size() != params.size())
        throw std::runtime_error("grad_check: closure returned wrong gradient count");

    GradCheckReport report;
    for (std::size_t k = 0; k < params.size(); ++k) {
        GradCheckEntry entry{names[k], 0.0};
        Tensor& p = *params[k];
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double saved = p.data[i];
            p.data[i] = saved + fd_step;
            const double lp = closure(params, nullptr);
            p.data[i] = saved - fd_step;
            const double lm = closure(params, nullptr);
            p.data[i] = saved;
            const double fd = (lp - lm) / (2.0 * fd_step);
            const double an = analytic[k].data[i];
            const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-6});
            entry.max_rel_error = std::max(entry.max_rel_error, std::fabs(fd - an) / denom);
        }
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace d2dpa
