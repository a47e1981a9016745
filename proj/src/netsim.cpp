#include "siim/netsim.hpp"

#include "siim/random.hpp"

#include <cmath>
#include <stdexcept>

namespace siim {

void validate(const Topology& topo) {
    if (topo.dist.rows() == 0 || topo.dist.rows() != topo.dist.cols())
        throw std::invalid_argument("topology: distance matrix must be square and non-empty");
    if (!topo.dist.allFinite() || (topo.dist.array() <= 0.0).any())
        throw std::invalid_argument("topology: distances must be finite and strictly positive");
}

void validate(const ChannelInstance& h) {
    if (h.gains.rows() == 0 || h.gains.rows() != h.gains.cols())
        throw std::invalid_argument("channel: gain matrix must be square and non-empty");
    if (!h.gains.allFinite())
        throw std::invalid_argument("channel: gain matrix has non-finite entries");
    if ((h.gains.array() < 0.0).any())
        throw std::invalid_argument("channel: gain magnitudes must be nonnegative");
}

Topology make_topology(Index n_links, std::uint64_t seed, std::string id) {
    if (n_links < 1) throw std::invalid_argument("make_topology: n_links must be >= 1");
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> direct(kDirectDistanceMin, kDirectDistanceMax);
    std::uniform_real_distribution<double> cross(kCrossDistanceMin, kCrossDistanceMax);
    Topology topo{std::move(id), Matrix(n_links, n_links)};
    for (Index n = 0; n < n_links; ++n)
        for (Index m = 0; m < n_links; ++m)
            topo.dist(n, m) = n == m ? direct(rng) : cross(rng);
    return topo;
}

ChannelInstance sample_channel(const Topology& topo, std::uint64_t seed) {
    validate(topo);
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index n_links = topo.n_links();
    ChannelInstance h{topo.id, seed, Matrix(n_links, n_links)};
    for (Index n = 0; n < n_links; ++n) {
        for (Index m = 0; m < n_links; ++m) {
            const double re = normal(rng);
            const double im = normal(rng);
            const double rayleigh = std::sqrt(0.5 * (re * re + im * im));
            h.gains(n, m) = std::pow(topo.dist(n, m), -0.5 * kPathlossExponent) * rayleigh;
        }
    }
    return h;
}

namespace {

void check_power(const ChannelInstance& h, const PowerVector& p) {
    if (p.size() != h.n_links())
        throw std::invalid_argument("power vector length does not match number of links");
}

}  // namespace

double sinr(const ChannelInstance& h, const PowerVector& p, Index n, const NoiseModel& noise) {
    check_power(h, p);
    if (n < 0 || n >= h.n_links()) throw std::invalid_argument("sinr: link index out of range");
    double interference = noise.sigma2;
    for (Index m = 0; m < h.n_links(); ++m) {
        if (m == n) continue;
        interference += h.gains(n, m) * h.gains(n, m) * p(m);
    }
    return h.gains(n, n) * h.gains(n, n) * p(n) / interference;
}

double sum_rate(const ChannelInstance& h, const PowerVector& p, const NoiseModel& noise, LogBase base) {
    check_power(h, p);
    const Index n_links = h.n_links();
    double total = 0.0;
    for (Index n = 0; n < n_links; ++n) {
        double interference = noise.sigma2;
        for (Index m = 0; m < n_links; ++m)
            if (m != n) interference += h.gains(n, m) * h.gains(n, m) * p(m);
        total += std::log1p(h.gains(n, n) * h.gains(n, n) * p(n) / interference);
    }
    return base == LogBase::two ? total / std::log(2.0) : total;
}

Vector flatten_gains(const ChannelInstance& h) {
    const Index n_links = h.n_links();
    Vector features(n_links * n_links);
    for (Index n = 0; n < n_links; ++n)
        for (Index m = 0; m < n_links; ++m) features(n * n_links + m) = h.gains(n, m);
    return features;
}

ChannelInstance unflatten_gains(const Vector& features, std::string topology_id, std::uint64_t seed) {
    const auto n_links = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(features.size()))));
    if (n_links * n_links != features.size())
        throw std::invalid_argument("unflatten_gains: feature length is not a perfect square");
    ChannelInstance h{std::move(topology_id), seed, Matrix(n_links, n_links)};
    for (Index n = 0; n < n_links; ++n)
        for (Index m = 0; m < n_links; ++m) h.gains(n, m) = features(n * n_links + m);
    return h;
}

}  // namespace siim
