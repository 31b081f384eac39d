#pragma once

#include "d2dpa/objective.hpp"

namespace d2dpa {

struct WmmseOptions {
    int iterations = 100;
    bool early_stop = false;        // optional tolerance exit, off by default
    double early_stop_tol = 1e-8;   // on the sum-rate delta between sweeps
};

PowerAllocation max_power(const ChannelInstance& inst);

// Scalar SISO WMMSE with full-power initialization (v = sqrt(pmax)) and hard
// clamping of v to [0, sqrt(pmax)] each sweep.
PowerAllocation wmmse(const ChannelInstance& inst, const WmmseOptions& opts = {});

// Exhaustive search over a uniform power grid with `levels` points per pair.
// Cost is levels^n; refuses n > 4.
PowerAllocation grid_oracle(const ChannelInstance& inst, int levels);

}  // namespace d2dpa
