#include "siim/config.hpp"

#include "siim/errors.hpp"
#include "siim/hash.hpp"
#include "siim/json_io.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace siim {

using nlohmann::json;

#define SIIM_CONFIG_FIELDS(X) \
    X(n_links)                \
    X(topology_seed_a)        \
    X(topology_seed_b)        \
    X(train_size)             \
    X(test_size)              \
    X(eval_size)              \
    X(ensemble_size)          \
    X(hidden_dims)            \
    X(activation)             \
    X(learning_rate)          \
    X(batch_size)             \
    X(epochs)                 \
    X(patience)               \
    X(stop_metric)            \
    X(validation_fraction)    \
    X(alpha)                  \
    X(epsilon)                \
    X(n_si)                   \
    X(p_max)                  \
    X(sigma2)                 \
    X(log_base)               \
    X(master_seed)            \
    X(output_dir)             \
    X(eps_sweep)              \
    X(rounds)                 \
    X(max_requests)           \
    X(stream_pattern)         \
    X(wmmse_max_iter)         \
    X(wmmse_tol)              \
    X(wmmse_stop)             \
    X(single_model_dnn)       \
    X(threads)

json to_json(const ExperimentConfig& config) {
    json j;
#define X(name) j[#name] = config.name;
    SIIM_CONFIG_FIELDS(X)
#undef X
    return j;
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig base) {
    if (!j.is_object()) throw FormatError("config: expected a JSON object");
    static const std::set<std::string> known = {
#define X(name) #name,
        SIIM_CONFIG_FIELDS(X)
#undef X
    };
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw FormatError("config: unknown key '" + key + "'");
    try {
#define X(name) \
    if (j.contains(#name)) j.at(#name).get_to(base.name);
        SIIM_CONFIG_FIELDS(X)
#undef X
    } catch (const json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    return base;
}

#undef SIIM_CONFIG_FIELDS

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return config_from_json(json_io::parse(buf.str(), "config " + path));
}

void validate(const ExperimentConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("config: ") + what);
    };
    require(c.n_links >= 1, "n_links must be >= 1");
    require(c.ensemble_size >= 1, "ensemble_size must be >= 1");
    require(c.learning_rate > 0.0, "learning_rate must be positive");
    require(c.batch_size >= 1, "batch_size must be >= 1");
    require(c.epochs >= 0, "epochs must be >= 0");
    require(c.patience >= 1, "patience must be >= 1");
    require(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0, "validation_fraction must be in [0, 1)");
    require(c.alpha >= 0.0, "alpha must be >= 0");
    require(c.epsilon > 0.0, "epsilon must be positive");
    require(c.n_si >= 1, "n_si must be >= 1");
    require(c.p_max > 0.0, "p_max must be positive");
    require(c.sigma2 > 0.0, "sigma2 must be positive");
    require(c.log_base == "e" || c.log_base == "2", "log_base must be \"e\" or \"2\"");
    require(!c.stream_pattern.empty(), "stream_pattern must not be empty");
    for (char t : c.stream_pattern) require(t == 'A' || t == 'B', "stream_pattern may only contain 'A' and 'B'");
    require(c.wmmse_max_iter >= 0, "wmmse_max_iter must be >= 0");
    require(c.wmmse_tol > 0.0, "wmmse_tol must be positive");
    require(c.wmmse_stop == "amplitude" || c.wmmse_stop == "objective", "wmmse_stop must be amplitude|objective");
    require(c.rounds >= 0, "rounds must be >= 0");
    for (double e : c.eps_sweep) require(e > 0.0, "eps_sweep entries must be positive");
    for (Index h : c.hidden_dims) require(h >= 1, "hidden_dims entries must be positive");
    activation_from_string(c.activation);
    stop_metric_from_string(c.stop_metric);
}

std::string config_hash(const ExperimentConfig& config) {
    json j = to_json(config);
    j.erase("output_dir");
    j.erase("threads");
    return hex64(fnv1a64(j.dump()));
}

std::vector<Index> layer_dims(const ExperimentConfig& config) {
    std::vector<Index> dims{config.n_links * config.n_links};
    dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
    dims.push_back(2 * config.n_links);
    return dims;
}

TrainConfig train_config(const ExperimentConfig& config) {
    TrainConfig t;
    t.learning_rate = config.learning_rate;
    t.batch_size = config.batch_size;
    t.epochs = config.epochs;
    t.patience = config.patience;
    t.validation_fraction = config.validation_fraction;
    t.stop_metric = stop_metric_from_string(config.stop_metric);
    t.seed = config.master_seed;
    return t;
}

WmmseOptions wmmse_options(const ExperimentConfig& config) {
    return {config.wmmse_max_iter, config.wmmse_tol, config.p_max,
            config.wmmse_stop == "objective" ? StopRule::objective : StopRule::amplitude};
}

QualifyParams qualify_params(const ExperimentConfig& config) {
    return {config.alpha, config.epsilon, config.p_max, log_base(config)};
}

NoiseModel noise_model(const ExperimentConfig& config) {
    return {config.sigma2};
}

LogBase log_base(const ExperimentConfig& config) {
    return config.log_base == "2" ? LogBase::two : LogBase::natural;
}

Activation activation(const ExperimentConfig& config) {
    return activation_from_string(config.activation);
}

}  // namespace siim
