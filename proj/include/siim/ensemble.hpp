#pragma once

#include "siim/neural.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace siim {

/// M independently initialized networks sharing one architecture.
struct Ensemble {
    std::vector<MLPParams> members;

    std::size_t size() const { return members.size(); }
    Index input_dim() const { return members.front().input_dim(); }
    Index n_outputs() const { return members.front().n_outputs(); }
};

/// Uniform-mixture moments per link. total_var is computed as
/// aleatoric_var + epistemic_var, so the decomposition holds exactly.
struct EnsemblePrediction {
    Vector mean;
    Vector aleatoric_var;
    Vector epistemic_var;
    Vector total_var;
};

struct EnsembleTrainReport {
    std::vector<std::vector<EpochStats>> histories;  // one per member
};

/// Member m is initialized from derive_seed(seed, member_init, m) and shuffled
/// with derive_seed(seed, member_shuffle, m), so results do not depend on the
/// thread count.
Ensemble train_ensemble(std::size_t ensemble_size, std::span<const LabeledSample> dataset,
                        std::span<const Index> layer_dims, const TrainConfig& config, std::uint64_t seed,
                        int threads = 1, EnsembleTrainReport* report = nullptr,
                        Activation activation = Activation::relu);

/// Mixture moments from per-member head outputs.
EnsemblePrediction combine(std::span<const HeadOutput> members);

EnsemblePrediction predict(const Ensemble& ensemble, const Vector& features);

Vector epistemic_std(const EnsemblePrediction& prediction);

void validate(const Ensemble& ensemble);

inline constexpr int kEnsembleFormatVersion = 1;

std::string save_ensemble(const Ensemble& ensemble, std::string_view config_hash = {});
Ensemble load_ensemble(std::string_view bytes);

}  // namespace siim
