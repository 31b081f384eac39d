#include "d2dpa/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace d2dpa {

std::vector<double> pair_rates(const ChannelInstance& inst, const std::vector<double>& p) {
    const int n = inst.n;
    if (p.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("pair_rates: power vector length mismatch");
    std::vector<double> c(n);
    for (int i = 0; i < n; ++i) {
        double interference = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double g = inst.gain(i, j);
            interference += g * g * p[j];
        }
        double gii = inst.gain(i, i);
        c[i] = std::log2(1.0 + gii * gii * p[i] / (inst.sigma2 + interference));
    }
    return c;
}

double weighted_sum_rate(const ChannelInstance& inst, const std::vector<double>& p) {
    auto c = pair_rates(inst, p);
    double s = 0.0;
    for (int i = 0; i < inst.n; ++i) s += inst.weights[i] * c[i];
    return s;
}

double homophily_discrete(const std::vector<std::vector<int>>& adjacency,
                          const std::vector<int>& labels) {
    const std::size_t n = adjacency.size();
    if (n == 0) throw std::invalid_argument("homophily_discrete: empty graph");
    if (labels.size() != n) throw std::invalid_argument("homophily_discrete: label count mismatch");
    double total = 0.0;
    int counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (adjacency[i].empty()) continue;  // degree 0: excluded from the expectation
        int same = 0;
        for (int j : adjacency[i]) {
            if (j < 0 || static_cast<std::size_t>(j) >= n)
                throw std::invalid_argument("homophily_discrete: neighbor index out of range");
            if (labels[j] == labels[i]) ++same;
        }
        total += static_cast<double>(same) / adjacency[i].size();
        ++counted;
    }
    if (counted == 0) throw std::invalid_argument("homophily_discrete: all nodes isolated");
    return total / counted;
}

HomophilyReport homophily_weighted(const std::vector<double>& edge_weights,
                                   const std::vector<double>& labels01) {
    const std::size_t n = labels01.size();
    if (n == 0) throw std::invalid_argument("homophily_weighted: empty graph");
    if (edge_weights.size() != n * n)
        throw std::invalid_argument("homophily_weighted: edge weight matrix must be n x n");
    for (double x : labels01)
        if (x < 0.0 || x > 1.0)
            throw std::invalid_argument("homophily_weighted: labels must lie in [0,1]");

    HomophilyReport rep;
    double total = 0.0;
    int counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double wsum = 0.0, agree = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;  // self-loops excluded; they would inflate h
            double e = edge_weights[i * n + j];
            if (e < 0.0)
                throw std::invalid_argument("homophily_weighted: edge weights must be >= 0");
            wsum += e;
            agree += e * (1.0 - std::fabs(labels01[i] - labels01[j]));
        }
        if (wsum == 0.0) {
            rep.excluded.push_back(static_cast<int>(i));
            continue;
        }
        double hi = agree / wsum;
        rep.per_node.push_back(hi);
        total += hi;
        ++counted;
    }
    if (counted == 0) throw std::invalid_argument("homophily_weighted: all nodes isolated");
    rep.h = total / counted;
    return rep;
}

HomophilyReport channel_homophily(const ChannelInstance& inst, const std::vector<double>& p) {
    const int n = inst.n;
    double hmax = 0.0;
    for (double v : inst.H) hmax = std::max(hmax, v);
    if (hmax <= 0.0) throw std::invalid_argument("channel_homophily: all-zero channel");
    std::vector<double> e(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) e[static_cast<std::size_t>(i) * n + j] = inst.gain(i, j) / hmax;
    std::vector<double> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = std::min(1.0, std::max(0.0, p[i] / inst.pmax));
    auto rep = homophily_weighted(e, labels);
    rep.noise_level = inst.sigma2;
    return rep;
}

}  // namespace d2dpa
