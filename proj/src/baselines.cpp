#include "d2dpa/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace d2dpa {

PowerAllocation max_power(const ChannelInstance& inst) {
    PowerAllocation a;
    a.p.assign(inst.n, inst.pmax);
    a.rates = pair_rates(inst, a.p);
    return a;
}

PowerAllocation wmmse(const ChannelInstance& inst, const WmmseOptions& opts) {
    if (opts.iterations < 1) throw std::invalid_argument("wmmse: iterations must be >= 1");
    const int n = inst.n;
    const double vmax = std::sqrt(inst.pmax);

    // g_ij = |h_ij|^2, row i = receiver, col j = transmitter
    std::vector<double> g(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double h = inst.gain(i, j);
            g[static_cast<std::size_t>(i) * n + j] = h * h;
        }
    std::vector<double> sqrt_gii(n);
    for (int i = 0; i < n; ++i) sqrt_gii[i] = std::sqrt(g[static_cast<std::size_t>(i) * n + i]);

    std::vector<double> v(n, vmax), u(n, 0.0), mw(n, 1.0);
    double prev_rate = -1.0;
    for (int it = 0; it < opts.iterations; ++it) {
        for (int i = 0; i < n; ++i) {
            double denom = inst.sigma2;
            for (int j = 0; j < n; ++j) denom += g[static_cast<std::size_t>(i) * n + j] * v[j] * v[j];
            u[i] = sqrt_gii[i] * v[i] / denom;
        }
        for (int i = 0; i < n; ++i) {
            double d = 1.0 - u[i] * sqrt_gii[i] * v[i];
            if (d < 1e-12) d = 1e-12;  // unreachable analytically; guards division blow-up
            mw[i] = 1.0 / d;
        }
        for (int i = 0; i < n; ++i) {
            double denom = 0.0;
            for (int j = 0; j < n; ++j)
                denom += inst.weights[j] * mw[j] * u[j] * u[j] * g[static_cast<std::size_t>(j) * n + i];
            double vi = inst.weights[i] * mw[i] * u[i] * sqrt_gii[i] / denom;
            if (!std::isfinite(vi)) throw std::runtime_error("wmmse: non-finite update");
            v[i] = std::min(std::max(vi, 0.0), vmax);
        }
        if (opts.early_stop) {
            std::vector<double> p(n);
            for (int i = 0; i < n; ++i) p[i] = v[i] * v[i];
            double rate = weighted_sum_rate(inst, p);
            if (it > 0 && std::fabs(rate - prev_rate) < opts.early_stop_tol) break;
            prev_rate = rate;
        }
    }

    PowerAllocation a;
    a.p.resize(n);
    for (int i = 0; i < n; ++i) a.p[i] = v[i] * v[i];
    a.rates = pair_rates(inst, a.p);
    return a;
}

PowerAllocation grid_oracle(const ChannelInstance& inst, int levels) {
    if (inst.n > 4) throw std::invalid_argument("grid_oracle: refuses n > 4 (cost levels^n)");
    if (levels < 2) throw std::invalid_argument("grid_oracle: need at least 2 levels");
    const int n = inst.n;
    std::vector<double> grid(levels);
    for (int k = 0; k < levels; ++k) grid[k] = inst.pmax * k / (levels - 1);

    std::vector<int> idx(n, 0);
    std::vector<double> p(n), best_p(n, 0.0);
    double best = -1.0;
    while (true) {
        for (int i = 0; i < n; ++i) p[i] = grid[idx[i]];
        double w = weighted_sum_rate(inst, p);
        if (w > best) {
            best = w;
            best_p = p;
        }
        int d = 0;
        while (d < n && ++idx[d] == levels) idx[d++] = 0;
        if (d == n) break;
    }

    PowerAllocation a;
    a.p = best_p;
    a.rates = pair_rates(inst, a.p);
    return a;
}

}  // namespace d2dpa
