#pragma once

#include "siim/ensemble.hpp"
#include "siim/neural.hpp"
#include "siim/qualify.hpp"
#include "siim/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace siim {

struct ExperimentConfig {
    Index n_links = 10;
    std::uint64_t topology_seed_a = 1;
    std::uint64_t topology_seed_b = 2;
    std::size_t train_size = 5000;
    std::size_t test_size = 2000;
    std::size_t eval_size = 2000;  // fixed A/B set re-evaluated after every retrain
    std::size_t ensemble_size = 5;
    std::vector<Index> hidden_dims = {1000, 1000, 500, 500, 100};
    std::string activation = "relu";
    double learning_rate = 1e-3;
    Index batch_size = 100;
    int epochs = 100;
    int patience = 30;
    std::string stop_metric = "mse";
    double validation_fraction = 0.1;
    double alpha = 1.96;
    double epsilon = 0.2;
    std::size_t n_si = 1000;
    double p_max = 1.0;
    double sigma2 = 1e-4;
    std::string log_base = "e";
    std::uint64_t master_seed = 42;
    std::string output_dir = "out";
    std::vector<double> eps_sweep = {0.01, 0.02, 0.1, 0.2, 0.5};
    int rounds = 10;
    std::size_t max_requests = 100000;
    std::string stream_pattern = "AB";
    int wmmse_max_iter = 500;
    double wmmse_tol = 1e-5;
    std::string wmmse_stop = "amplitude";
    bool single_model_dnn = false;
    int threads = 1;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

nlohmann::json to_json(const ExperimentConfig& config);

/// Overlays the keys present in j onto base. Unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

ExperimentConfig load_config(const std::string& path);

void validate(const ExperimentConfig& config);

/// Provenance tag over every field that affects results (excludes
/// output_dir and threads).
std::string config_hash(const ExperimentConfig& config);

std::vector<Index> layer_dims(const ExperimentConfig& config);
TrainConfig train_config(const ExperimentConfig& config);
WmmseOptions wmmse_options(const ExperimentConfig& config);
QualifyParams qualify_params(const ExperimentConfig& config);
NoiseModel noise_model(const ExperimentConfig& config);
LogBase log_base(const ExperimentConfig& config);
Activation activation(const ExperimentConfig& config);

}  // namespace siim
