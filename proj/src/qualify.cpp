#include "siim/qualify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace siim {

FeasibleSet confidence_intervals(const EnsemblePrediction& prediction, double alpha, double p_max) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("confidence_intervals: alpha must be >= 0");
    if (!(p_max > 0.0)) throw std::invalid_argument("confidence_intervals: p_max must be positive");
    const Vector center = p_max * prediction.mean;
    const Vector half_width = alpha * p_max * epistemic_std(prediction);
    return {(center - half_width).cwiseMax(0.0).cwiseMin(p_max), (center + half_width).cwiseMax(0.0).cwiseMin(p_max)};
}

double maxdist(double a, double b, double c) {
    return std::max({std::abs(a - b), std::abs(a - c), std::abs(b - c)});
}

QualifyDecision qualify(const ChannelInstance& h, const NoiseModel& noise, const EnsemblePrediction& prediction,
                        const QualifyParams& params) {
    if (!(params.epsilon > 0.0)) throw std::invalid_argument("qualify: epsilon must be positive");
    if (prediction.mean.size() != h.n_links()) throw std::invalid_argument("qualify: prediction length mismatch");

    QualifyDecision d;
    d.feasible_set = confidence_intervals(prediction, params.alpha, params.p_max);
    const PowerVector p_hat = (params.p_max * prediction.mean).cwiseMax(0.0).cwiseMin(params.p_max);
    d.r_hat = sum_rate(h, p_hat, noise, params.log_base);
    d.r_upper = sum_rate(h, d.feasible_set.upper, noise, params.log_base);
    d.r_lower = sum_rate(h, d.feasible_set.lower, noise, params.log_base);
    if (d.r_hat > 0.0) {
        d.ratio = maxdist(d.r_upper, d.r_lower, d.r_hat) / d.r_hat;
        d.credible = d.ratio <= params.epsilon;
    } else {
        d.ratio = std::numeric_limits<double>::infinity();
        d.credible = false;
    }
    return d;
}

}  // namespace siim
