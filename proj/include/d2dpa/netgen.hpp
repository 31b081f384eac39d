#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "d2dpa/rng.hpp"

namespace d2dpa {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Topology {
    int n = 0;
    std::vector<Point> tx;
    std::vector<Point> rx;
    double half_width = 0.0;
};

// Gain matrix convention: H[i][j] (row-major) is the amplitude gain from
// transmitter j to receiver i, so the SINR at receiver i sums |H[i][j]|^2 p_j
// over j != i with the desired signal on the diagonal.
struct ChannelInstance {
    int n = 0;
    std::vector<double> H;  // n*n row-major, amplitude domain
    double sigma2 = 0.0;
    std::vector<double> weights;
    double pmax = 1.0;

    double gain(int rx_i, int tx_j) const { return H[static_cast<std::size_t>(rx_i) * n + tx_j]; }
    double& gain(int rx_i, int tx_j) { return H[static_cast<std::size_t>(rx_i) * n + tx_j]; }
};

struct Dataset {
    std::vector<ChannelInstance> instances;
    std::vector<std::uint32_t> topology_ids;  // parallel to instances
    std::uint64_t seed = 0;
};

struct ChannelParams {
    double sigma2 = 2.6e-5;
    double pmax = 1.0;
    double fading_scale = 1.0;
    double weight = 1.0;    // all pairs equal weight by default
    double half_width = 0;  // 0 -> use n (the paper's [-n,n]^2 field)
    double rx_min = 1.0;
    double rx_max = 0;      // 0 -> use n/4
    double pathloss_exponent = 2.2;
};

Topology sample_topology(int n, double half_width, double rx_min, double rx_max, Rng& rng);

// entry (i,j) = ||t_j - r_i||^-alpha; throws on distances below 1e-9
std::vector<double> pathloss_matrix(const Topology& topo, double alpha = 2.2);

std::vector<double> sample_fading(int n, double scale, Rng& rng);

ChannelInstance build_channel(const Topology& topo, const std::vector<double>& fading,
                              double sigma2, const std::vector<double>& weights, double pmax,
                              double pathloss_exponent = 2.2);

// Multi-size datasets draw n round-robin from n_list per topology. Each
// topology owns an independent RNG stream, so generation is deterministic
// given the seed regardless of evaluation order.
Dataset gen_dataset(const std::vector<int>& n_list, int topologies, int fades_per_topology,
                    const ChannelParams& params, std::uint64_t seed);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);
void export_dataset_csv(const Dataset& ds, const std::string& path);

std::uint64_t dataset_hash(const Dataset& ds);

}  // namespace d2dpa
