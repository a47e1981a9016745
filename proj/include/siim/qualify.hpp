#pragma once

#include "siim/ensemble.hpp"
#include "siim/netsim.hpp"

namespace siim {

/// Per-link confidence box [lower_n, upper_n] inside [0, p_max].
struct FeasibleSet {
    PowerVector lower;
    PowerVector upper;
};

struct QualifyDecision {
    bool credible = false;
    double r_hat = 0.0;
    double r_upper = 0.0;
    double r_lower = 0.0;
    double ratio = 0.0;  // +inf when r_hat == 0
    FeasibleSet feasible_set;
};

struct QualifyParams {
    double alpha = 1.96;
    double epsilon = 0.2;
    double p_max = 1.0;
    LogBase log_base = LogBase::natural;
};

/// [p - alpha * sigma_epi, p + alpha * sigma_epi] per link with p = p_max * mean,
/// clipped to [0, p_max].
FeasibleSet confidence_intervals(const EnsemblePrediction& prediction, double alpha, double p_max = 1.0);

/// max(|a - b|, |a - c|, |b - c|)
double maxdist(double a, double b, double c);

/// Sum-rates at the prediction and at both box corners; credible iff
/// maxdist / r_hat <= epsilon. A zero predicted rate is never credible.
QualifyDecision qualify(const ChannelInstance& h, const NoiseModel& noise, const EnsemblePrediction& prediction,
                        const QualifyParams& params);

}  // namespace siim
