#pragma once

#include "siim/config.hpp"
#include "siim/dataset.hpp"
#include "siim/ensemble.hpp"
#include "siim/report.hpp"

#include <functional>
#include <vector>

namespace siim {

/// Everything the self-improving loop carries between requests.
struct SelfImproveState {
    ExperimentConfig config;
    std::vector<Topology> topologies;  // A, then B
    Ensemble ensemble;
    std::vector<LabeledSample> base;   // D
    std::vector<LabeledSample> si;     // D_SI, cleared on every retrain
    int round = 0;
    std::size_t requests = 0;
    std::size_t enhanced = 0;
    // training_curves[round][member] = per-epoch history
    std::vector<std::vector<std::vector<EpochStats>>> training_curves;
};

struct RequestRecord {
    std::string topology_id;
    int round = 0;
    bool credible = false;
    bool enhanced = false;
    double criterion_ratio = 0.0;
    PowerVector predicted_power;
    PowerVector used_power;
    double achieved_rate = 0.0;
    double dnn_rate = 0.0;     // rate of the ungated prediction
    double wmmse_rate = 0.0;   // cold-start reference
    int enhance_iterations = 0;
    int wmmse_iterations = 0;
};

struct RequestOutcome {
    PowerVector power;
    RequestRecord record;
};

std::vector<Topology> make_topologies(const ExperimentConfig& config);

/// Labeled Topology-A training records (instance i seeded from the train_data stream).
std::vector<DatasetRecord> generate_training_data(const ExperimentConfig& config);

/// Mixed A/B test stream following config.stream_pattern.
std::vector<ChannelInstance> generate_test_stream(const ExperimentConfig& config, std::size_t count,
                                                  std::size_t offset = 0);

std::vector<ChannelInstance> generate_eval_set(const ExperimentConfig& config);

/// Fresh ensemble for a given round; seeds derive from (master_seed, round).
Ensemble train_models(const ExperimentConfig& config, std::span<const LabeledSample> data, int round,
                      EnsembleTrainReport* report = nullptr);

/// Generates D from Topology A with cold-start WMMSE labels and trains the ensemble.
SelfImproveState training_stage(const ExperimentConfig& config);

/// Rebuilds a round-0 state from saved artifacts.
SelfImproveState make_state(const ExperimentConfig& config, Ensemble ensemble, std::vector<LabeledSample> base);

/// Predict, qualify, and either transmit the prediction or enhance it with
/// warm-started WMMSE (appending the result to D_SI).
RequestOutcome handle_request(SelfImproveState& state, const ChannelInstance& h);

/// Retrains from fresh initialization on D u D_SI once |D_SI| >= n_si.
/// Returns true when a retrain happened.
bool maybe_retrain(SelfImproveState& state);

std::uint64_t state_hash(const SelfImproveState& state);

/// Scores instances against the current ensemble without mutating state.
/// Every instance gets a warm start from its prediction so any epsilon can
/// be applied afterwards with apply_gate.
struct InstanceEval {
    std::string topology_id;
    double ratio = 0.0;
    double dnn_rate = 0.0;
    double predicted_rate = 0.0;  // rate at the ensemble mean, what a credible request transmits
    double enhanced_rate = 0.0;
    double wmmse_rate = 0.0;
    double max_power_rate = 0.0;
    double rand_power_rate = 0.0;
    int warm_iterations = 0;
    int cold_iterations = 0;
};

std::vector<InstanceEval> evaluate_instances(const SelfImproveState& state, std::span<const ChannelInstance> instances);

std::vector<Sample> apply_gate(std::span<const InstanceEval> evals, double epsilon);

std::vector<SweepMetrics> sweep_epsilon(std::span<const InstanceEval> evals, std::span<const double> epsilons);

struct StreamSpec {
    std::size_t n_requests = 0;
    int stop_after_rounds = -1;  // stop once state.round reaches this (negative: never)
    bool eps_sweep = true;       // sweep config.eps_sweep on the round-0 models
    bool evaluate_rounds = true; // score the fixed eval set at the start of every round
    std::vector<ChannelInstance> instances;  // explicit stream; generated from config when empty
};

/// Drives handle_request / maybe_retrain over the stream and aggregates the
/// five algorithm columns on identical instances.
MetricsReport run_experiment(SelfImproveState& state, const StreamSpec& spec,
                             const std::function<void(const RoundMetrics&)>& on_round = {});

}  // namespace siim
