#pragma once

#include "siim/netsim.hpp"
#include "siim/random.hpp"

#include <optional>
#include <vector>

namespace siim {

enum class StopRule {
    amplitude,  // max_n |v_n - v_n_prev| < tol
    objective,  // increase of sum_n log w_n <= tol
};

struct WmmseOptions {
    int max_iter = 500;
    double tol = 1e-5;
    double p_max = 1.0;
    StopRule stop_rule = StopRule::amplitude;
};

struct SolverResult {
    PowerVector p;
    int iterations = 0;
    // Natural-log sum-rate at the starting point followed by one entry per
    // completed iteration.
    std::vector<double> objective_trace;
};

/// Scalar-channel WMMSE block-coordinate ascent on amplitudes v = sqrt(p).
/// Cold start (no p_init) begins from full power.
SolverResult wmmse(const ChannelInstance& h, const NoiseModel& noise,
                   const std::optional<PowerVector>& p_init = std::nullopt,
                   const WmmseOptions& options = {});

PowerVector max_power(Index n_links, double p_max = 1.0);

PowerVector rand_power(Index n_links, Rng& rng, double p_max = 1.0);

inline constexpr Index kGridOracleMaxLinks = 3;
inline constexpr int kGridOracleMaxLevels = 256;

/// Exhaustive search over {0, p_max/(levels-1), ..., p_max}^N. Ties keep the
/// lexicographically smallest power vector.
SolverResult grid_oracle(const ChannelInstance& h, const NoiseModel& noise, int levels, double p_max = 1.0);

}  // namespace siim
