#include <cmath>

#include "d2dpa/baselines.hpp"
#include "doctest.h"

using namespace d2dpa;

namespace {

ChannelInstance random_instance(int n, Rng& rng, double sigma2 = 2.6e-5) {
    Topology t = sample_topology(n, static_cast<double>(n) + 4.0, 1.0, std::max(1.0, n / 4.0), rng);
    auto fading = sample_fading(n, 1.0, rng);
    return build_channel(t, fading, sigma2, std::vector<double>(n, 1.0), 1.0);
}

}  // namespace

TEST_CASE("max_power fills the power box") {
    Rng rng(1);
    auto inst = random_instance(5, rng);
    inst.pmax = 0.7;
    auto a = max_power(inst);
    for (double p : a.p) CHECK(p == 0.7);
}

TEST_CASE("wmmse on n=1 returns pmax") {
    ChannelInstance inst;
    inst.n = 1;
    inst.H = {0.8};
    inst.sigma2 = 1e-3;
    inst.weights = {1.0};
    inst.pmax = 1.0;
    auto a = wmmse(inst, {.iterations = 1});
    CHECK(a.p[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("wmmse feasibility and dominance over max power") {
    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        auto inst = random_instance(8, rng);
        auto a = wmmse(inst);
        for (double p : a.p) {
            CHECK(p >= 0.0);
            CHECK(p <= inst.pmax);
        }
        CHECK(weighted_sum_rate(inst, a.p) >=
              weighted_sum_rate(inst, max_power(inst).p) - 1e-9);
    }
}

TEST_CASE("wmmse sum-rate improves monotonically across sweeps") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        auto inst = random_instance(6, rng);
        double prev = weighted_sum_rate(inst, max_power(inst).p);
        for (int k = 1; k <= 25; ++k) {
            double cur = weighted_sum_rate(inst, wmmse(inst, {.iterations = k}).p);
            CHECK(cur >= prev - 1e-9);
            prev = cur;
        }
    }
}

TEST_CASE("wmmse is permutation equivariant") {
    Rng rng(13);
    auto inst = random_instance(5, rng);
    auto base = wmmse(inst);
    std::vector<int> pi = {4, 2, 0, 1, 3};
    ChannelInstance perm = inst;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) perm.gain(i, j) = inst.gain(pi[i], pi[j]);
    auto pa = wmmse(perm);
    for (int i = 0; i < 5; ++i) CHECK(pa.p[i] == doctest::Approx(base.p[pi[i]]).epsilon(1e-12));
}

TEST_CASE("strong symmetric interference turns one pair off") {
    // near-symmetric g_ii ~ g_ij: sharing is strictly worse than one speaker
    // at full power. An exactly symmetric instance is a saddle point the
    // iteration cannot leave, so a hair of asymmetry is required.
    ChannelInstance inst;
    inst.n = 2;
    inst.H = {1.0, 1.0, 1.0, 1.0 - 1e-3};
    inst.sigma2 = 2.6e-5;
    inst.weights = {1.0, 1.0};
    inst.pmax = 1.0;
    auto a = wmmse(inst);
    double lo = std::min(a.p[0], a.p[1]), hi = std::max(a.p[0], a.p[1]);
    CHECK(hi > 0.99);
    CHECK(lo < 0.01);
    auto oracle = grid_oracle(inst, 101);
    CHECK(weighted_sum_rate(inst, a.p) >=
          0.99 * weighted_sum_rate(inst, oracle.p));
}

TEST_CASE("grid oracle basics") {
    ChannelInstance inst;
    inst.n = 1;
    inst.H = {1.0};
    inst.sigma2 = 0.1;
    inst.weights = {1.0};
    inst.pmax = 1.0;
    CHECK(grid_oracle(inst, 11).p[0] == doctest::Approx(1.0));

    // decoupled pairs both transmit at pmax
    ChannelInstance weak;
    weak.n = 2;
    weak.H = {1.0, 1e-9, 1e-9, 1.0};
    weak.sigma2 = 0.01;
    weak.weights = {1.0, 1.0};
    weak.pmax = 1.0;
    auto a = grid_oracle(weak, 21);
    CHECK(a.p[0] == doctest::Approx(1.0));
    CHECK(a.p[1] == doctest::Approx(1.0));

    ChannelInstance big;
    big.n = 5;
    big.H.assign(25, 0.1);
    big.sigma2 = 0.1;
    big.weights.assign(5, 1.0);
    big.pmax = 1.0;
    CHECK_THROWS(grid_oracle(big, 3));
}

TEST_CASE("ordering oracle >= wmmse >= max_power on random n=2 draws") {
    Rng rng(2025);
    int ordered = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        auto inst = random_instance(2, rng);
        double o = weighted_sum_rate(inst, grid_oracle(inst, 26).p);
        double w = weighted_sum_rate(inst, wmmse(inst).p);
        double m = weighted_sum_rate(inst, max_power(inst).p);
        if (o >= w - 1e-6 && w >= m - 1e-9) ++ordered;
    }
    CHECK(ordered >= trials * 95 / 100);
}
