#pragma once

#include <optional>
#include <vector>

#include "d2dpa/netgen.hpp"

namespace d2dpa {

struct PowerAllocation {
    std::vector<double> p;                          // linear power, in [0, pmax]
    std::optional<std::vector<double>> rates;       // per-pair rates, bits/s/Hz
};

struct HomophilyReport {
    double h = 0.0;
    std::vector<double> per_node;   // contribution of each counted node
    std::vector<int> excluded;      // nodes with no positive-weight edge
    double noise_level = 0.0;       // sigma2 used to produce the labels
};

// c_i = log2(1 + |h_ii|^2 p_i / (sigma2 + sum_{j != i} |h_ij|^2 p_j))
std::vector<double> pair_rates(const ChannelInstance& inst, const std::vector<double>& p);

double weighted_sum_rate(const ChannelInstance& inst, const std::vector<double>& p);

// Mean over nodes (degree > 0) of the fraction of neighbors sharing the label.
double homophily_discrete(const std::vector<std::vector<int>>& adjacency,
                          const std::vector<int>& labels);

// h = mean_i [ sum_j e_ij (1 - |x_i - x_j|) / sum_j e_ij ], j != i.
// edge_weights is n x n row-major; labels must lie in [0, 1].
HomophilyReport homophily_weighted(const std::vector<double>& edge_weights,
                                   const std::vector<double>& labels01);

// Table-style homophily of a channel instance: edge weights are the
// off-diagonal gains normalized to max 1, labels are p/pmax.
HomophilyReport channel_homophily(const ChannelInstance& inst, const std::vector<double>& p);

}  // namespace d2dpa
