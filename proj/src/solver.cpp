#include "siim/solver.hpp"

#include "siim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace siim {

namespace {

struct Receivers {
    Vector u;  // MMSE receive coefficients
    Vector w;  // MSE weights
};

Receivers update_receivers(const Matrix& gain, const Matrix& power_gain, const Vector& v, double sigma2) {
    const Index n_links = gain.rows();
    const Vector received = power_gain * v.array().square().matrix();
    Receivers r{Vector(n_links), Vector(n_links)};
    for (Index n = 0; n < n_links; ++n) {
        r.u(n) = gain(n, n) * v(n) / (sigma2 + received(n));
        r.w(n) = 1.0 / (1.0 - r.u(n) * gain(n, n) * v(n));
    }
    return r;
}

}  // namespace

SolverResult wmmse(const ChannelInstance& h, const NoiseModel& noise, const std::optional<PowerVector>& p_init,
                   const WmmseOptions& options) {
    validate(h);
    if (!(noise.sigma2 > 0.0)) throw std::invalid_argument("wmmse: noise power must be positive");
    if (!(options.p_max > 0.0)) throw std::invalid_argument("wmmse: p_max must be positive");
    if (options.max_iter < 0) throw std::invalid_argument("wmmse: max_iter must be nonnegative");

    const Index n_links = h.n_links();
    const double v_max = std::sqrt(options.p_max);
    const Matrix& gain = h.gains;
    const Matrix power_gain = gain.array().square().matrix();

    Vector v = Vector::Constant(n_links, v_max);
    if (p_init) {
        if (p_init->size() != n_links) throw std::invalid_argument("wmmse: p_init length mismatch");
        if (!p_init->allFinite() || (p_init->array() < 0.0).any() || (p_init->array() > options.p_max).any())
            throw std::invalid_argument("wmmse: p_init is not a feasible power vector");
        v = p_init->array().sqrt().matrix();
    }

    SolverResult result;
    result.objective_trace.reserve(static_cast<std::size_t>(std::min(options.max_iter, 1000)) + 1);
    result.objective_trace.push_back(sum_rate(h, v.array().square().matrix(), noise));

    Receivers rx = update_receivers(gain, power_gain, v, noise.sigma2);
    double log_w_sum = rx.w.array().log().sum();

    for (int it = 0; it < options.max_iter; ++it) {
        const Vector weighted = rx.w.array() * rx.u.array().square();
        const Vector denom = power_gain.transpose() * weighted;
        Vector v_next(n_links);
        for (Index n = 0; n < n_links; ++n) {
            const double numer = rx.w(n) * rx.u(n) * gain(n, n);
            v_next(n) = denom(n) > 0.0 ? std::clamp(numer / denom(n), 0.0, v_max) : 0.0;
        }
        const double step = (v_next - v).cwiseAbs().maxCoeff();
        v = std::move(v_next);
        rx = update_receivers(gain, power_gain, v, noise.sigma2);
        const double next_log_w_sum = rx.w.array().log().sum();

        result.iterations = it + 1;
        result.objective_trace.push_back(sum_rate(h, v.array().square().matrix(), noise));

        const bool converged = options.stop_rule == StopRule::amplitude ? step < options.tol
                                                                         : next_log_w_sum - log_w_sum <= options.tol;
        log_w_sum = next_log_w_sum;
        if (converged) break;
    }

    result.p = v.array().square().min(options.p_max).max(0.0).matrix();
    return result;
}

PowerVector max_power(Index n_links, double p_max) {
    if (n_links < 0) throw std::invalid_argument("max_power: negative link count");
    return PowerVector::Constant(n_links, p_max);
}

PowerVector rand_power(Index n_links, Rng& rng, double p_max) {
    if (n_links < 0) throw std::invalid_argument("rand_power: negative link count");
    std::uniform_real_distribution<double> uniform(0.0, p_max);
    PowerVector p(n_links);
    for (Index n = 0; n < n_links; ++n) p(n) = uniform(rng);
    return p;
}

SolverResult grid_oracle(const ChannelInstance& h, const NoiseModel& noise, int levels, double p_max) {
    validate(h);
    const Index n_links = h.n_links();
    if (n_links > kGridOracleMaxLinks)
        throw UnsupportedError("grid_oracle: at most " + std::to_string(kGridOracleMaxLinks) + " links supported");
    if (levels < 2 || levels > kGridOracleMaxLevels)
        throw UnsupportedError("grid_oracle: levels must be in [2, " + std::to_string(kGridOracleMaxLevels) + "]");

    const double step = p_max / (levels - 1);
    std::vector<int> idx(static_cast<std::size_t>(n_links), 0);
    PowerVector p = PowerVector::Zero(n_links);
    PowerVector best_p = p;
    double best = sum_rate(h, p, noise);
    // Odometer with the last coordinate fastest: visits grid points in
    // lexicographic order, so a strict comparison keeps the smallest tie.
    while (true) {
        Index pos = n_links - 1;
        while (pos >= 0 && idx[pos] == levels - 1) {
            idx[pos] = 0;
            p(pos) = 0.0;
            --pos;
        }
        if (pos < 0) break;
        ++idx[pos];
        p(pos) = idx[pos] == levels - 1 ? p_max : idx[pos] * step;
        const double rate = sum_rate(h, p, noise);
        if (rate > best) {
            best = rate;
            best_p = p;
        }
    }
    return SolverResult{best_p, 0, {best}};
}

}  // namespace siim
