#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace siim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Transmit powers, one entry per link, each in [0, p_max].
using PowerVector = Eigen::VectorXd;

inline constexpr double kPathlossExponent = 3.76;
inline constexpr double kDirectDistanceMin = 10.0;
inline constexpr double kDirectDistanceMax = 15.0;
inline constexpr double kCrossDistanceMin = 10.0;
inline constexpr double kCrossDistanceMax = 20.0;

/// Link geometry. dist(n, m) is the distance in meters from transmitter m to
/// the receiver of link n.
struct Topology {
    std::string id;
    Matrix dist;

    Index n_links() const { return dist.rows(); }
};

/// One channel realization. gains(n, m) = |h_nm|, the magnitude of the channel
/// from transmitter m to receiver n. Phases play no role in the rate model.
struct ChannelInstance {
    std::string topology_id;
    std::uint64_t seed = 0;
    Matrix gains;

    Index n_links() const { return gains.rows(); }
};

struct NoiseModel {
    double sigma2 = 1.0;
};

enum class LogBase { natural, two };

Topology make_topology(Index n_links, std::uint64_t seed, std::string id = "A");

/// |h_nm| = sqrt(dist^-3.76) * r with r Rayleigh-distributed, E[r^2] = 1.
ChannelInstance sample_channel(const Topology& topo, std::uint64_t seed);

double sinr(const ChannelInstance& h, const PowerVector& p, Index n, const NoiseModel& noise);

/// Sum over links of log(1 + SINR_n).
double sum_rate(const ChannelInstance& h, const PowerVector& p, const NoiseModel& noise,
                LogBase base = LogBase::natural);

/// Row-major flattening of the gain matrix, the network's input layout.
Vector flatten_gains(const ChannelInstance& h);

/// Inverse of flatten_gains for a square N x N matrix.
ChannelInstance unflatten_gains(const Vector& features, std::string topology_id = {}, std::uint64_t seed = 0);

void validate(const Topology& topo);
void validate(const ChannelInstance& h);

}  // namespace siim
