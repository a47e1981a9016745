#include "siim/ensemble.hpp"

#include "siim/errors.hpp"
#include "siim/json_io.hpp"
#include "siim/parallel.hpp"
#include "siim/random.hpp"

#include <stdexcept>

namespace siim {

void validate(const Ensemble& ensemble) {
    if (ensemble.members.empty()) throw std::invalid_argument("ensemble: needs at least one member");
    for (const auto& m : ensemble.members)
        if (m.layer_dims != ensemble.members.front().layer_dims)
            throw std::invalid_argument("ensemble: members must share layer_dims");
}

Ensemble train_ensemble(std::size_t ensemble_size, std::span<const LabeledSample> dataset,
                        std::span<const Index> layer_dims, const TrainConfig& config, std::uint64_t seed, int threads,
                        EnsembleTrainReport* report, Activation activation) {
    if (ensemble_size < 1) throw std::invalid_argument("train_ensemble: ensemble size must be >= 1");
    if (dataset.empty()) throw std::invalid_argument("train_ensemble: dataset is empty");

    Ensemble ensemble;
    ensemble.members.resize(ensemble_size);
    std::vector<std::vector<EpochStats>> histories(ensemble_size);
    parallel_for(ensemble_size, threads, [&](std::size_t m) {
        TrainConfig member_config = config;
        member_config.seed = derive_seed(seed, Stream::member_shuffle, m);
        MLPParams init = init_params(layer_dims, derive_seed(seed, Stream::member_init, m), activation);
        TrainResult trained = train(std::move(init), dataset, member_config);
        ensemble.members[m] = std::move(trained.params);
        histories[m] = std::move(trained.history);
    });
    if (report) report->histories = std::move(histories);
    return ensemble;
}

EnsemblePrediction combine(std::span<const HeadOutput> members) {
    if (members.empty()) throw std::invalid_argument("combine: no member outputs");
    const Index n_links = members.front().mu.size();
    const double inv_m = 1.0 / static_cast<double>(members.size());
    // Moments of the means are taken relative to the first member, which is
    // exact when members agree and avoids cancellation in E[mu^2] - mu_hat^2.
    const Vector& ref = members.front().mu;
    Vector shift_mean = Vector::Zero(n_links);
    Vector shift_second = Vector::Zero(n_links);
    Vector aleatoric = Vector::Zero(n_links);
    for (const auto& out : members) {
        if (out.mu.size() != n_links || out.sigma2.size() != n_links)
            throw std::invalid_argument("combine: member outputs disagree in length");
        const Vector d = out.mu - ref;
        shift_mean += d;
        shift_second += d.array().square().matrix();
        aleatoric += out.sigma2;
    }
    shift_mean *= inv_m;
    shift_second *= inv_m;
    aleatoric *= inv_m;

    Vector mean = ref + shift_mean;
    // Population variance of member means; rounding can leave it a hair below 0.
    Vector epistemic = (shift_second - shift_mean.array().square().matrix()).cwiseMax(0.0);

    EnsemblePrediction pred{std::move(mean), std::move(aleatoric), std::move(epistemic), Vector()};
    pred.total_var = pred.aleatoric_var + pred.epistemic_var;
    return pred;
}

EnsemblePrediction predict(const Ensemble& ensemble, const Vector& features) {
    validate(ensemble);
    std::vector<HeadOutput> outs;
    outs.reserve(ensemble.size());
    for (const auto& member : ensemble.members) outs.push_back(forward(member, features));
    return combine(outs);
}

Vector epistemic_std(const EnsemblePrediction& prediction) {
    return prediction.epistemic_var.cwiseMax(0.0).cwiseSqrt();
}

std::string save_ensemble(const Ensemble& ensemble, std::string_view config_hash) {
    validate(ensemble);
    json_io::json members = json_io::json::array();
    for (const auto& m : ensemble.members) members.push_back(json_io::model_to_json(m, config_hash));
    json_io::json doc{
        {"version", kEnsembleFormatVersion},
        {"M", ensemble.size()},
        {"members", std::move(members)},
        {"created_from_config_hash", std::string(config_hash)},
    };
    return doc.dump();
}

Ensemble load_ensemble(std::string_view bytes) {
    const auto doc = json_io::parse(bytes, "ensemble");
    json_io::require_version(doc, kEnsembleFormatVersion, "ensemble");
    if (!doc.contains("members") || !doc["members"].is_array() || !doc.contains("M"))
        throw FormatError("ensemble: missing 'M' or 'members'");
    Ensemble ensemble;
    for (const auto& m : doc["members"]) ensemble.members.push_back(json_io::model_from_json(m));
    if (!doc["M"].is_number_unsigned() || doc["M"].get<std::size_t>() != ensemble.size())
        throw FormatError("ensemble: 'M' does not match member count");
    try {
        validate(ensemble);
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    return ensemble;
}

}  // namespace siim
