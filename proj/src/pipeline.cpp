#include "siim/pipeline.hpp"

#include "siim/hash.hpp"
#include "siim/parallel.hpp"
#include "siim/random.hpp"

#include <algorithm>
#include <stdexcept>

namespace siim {

std::vector<Topology> make_topologies(const ExperimentConfig& config) {
    return {make_topology(config.n_links, config.topology_seed_a, "A"),
            make_topology(config.n_links, config.topology_seed_b, "B")};
}

std::vector<DatasetRecord> generate_training_data(const ExperimentConfig& config) {
    const auto topologies = make_topologies(config);
    const auto instances =
        generate_instances(topologies[0], config.train_size, config.master_seed, Stream::train_data, config.threads);
    return label_all(instances, noise_model(config), wmmse_options(config), config.threads);
}

std::vector<ChannelInstance> generate_test_stream(const ExperimentConfig& config, std::size_t count,
                                                  std::size_t offset) {
    const auto topologies = make_topologies(config);
    return generate_stream(topologies, config.stream_pattern, count, config.master_seed, Stream::test_stream, offset);
}

std::vector<ChannelInstance> generate_eval_set(const ExperimentConfig& config) {
    const auto topologies = make_topologies(config);
    return generate_stream(topologies, "AB", config.eval_size, config.master_seed, Stream::eval_set);
}

Ensemble train_models(const ExperimentConfig& config, std::span<const LabeledSample> data, int round,
                      EnsembleTrainReport* report) {
    const auto dims = layer_dims(config);
    return train_ensemble(config.ensemble_size, data, dims, train_config(config),
                          derive_seed(config.master_seed, Stream::member_init, static_cast<std::uint64_t>(round)),
                          config.threads, report, activation(config));
}

SelfImproveState make_state(const ExperimentConfig& config, Ensemble ensemble, std::vector<LabeledSample> base) {
    validate(config);
    validate(ensemble);
    if (ensemble.input_dim() != config.n_links * config.n_links || ensemble.n_outputs() != config.n_links)
        throw std::invalid_argument("ensemble shape does not match config.n_links");
    SelfImproveState state;
    state.config = config;
    state.topologies = make_topologies(config);
    state.ensemble = std::move(ensemble);
    state.base = std::move(base);
    return state;
}

SelfImproveState training_stage(const ExperimentConfig& config) {
    validate(config);
    if (config.train_size == 0) throw std::invalid_argument("training_stage: train_size is 0, nothing to train on");
    const auto records = generate_training_data(config);
    auto base = to_samples(records, config.p_max);
    EnsembleTrainReport report;
    Ensemble ensemble = train_models(config, base, 0, &report);
    SelfImproveState state = make_state(config, std::move(ensemble), std::move(base));
    state.training_curves.push_back(std::move(report.histories));
    return state;
}

namespace {

PowerVector to_power(const Vector& normalized, double p_max) {
    return (p_max * normalized).cwiseMax(0.0).cwiseMin(p_max);
}

PowerVector dnn_power(const SelfImproveState& state, const Vector& features, const EnsemblePrediction& pred) {
    if (state.config.single_model_dnn) return to_power(forward(state.ensemble.members.front(), features).mu, state.config.p_max);
    return to_power(pred.mean, state.config.p_max);
}

}  // namespace

RequestOutcome handle_request(SelfImproveState& state, const ChannelInstance& h) {
    const auto& cfg = state.config;
    const NoiseModel noise = noise_model(cfg);
    const LogBase base = log_base(cfg);
    const WmmseOptions opts = wmmse_options(cfg);

    const Vector features = flatten_gains(h);
    const EnsemblePrediction pred = predict(state.ensemble, features);
    const QualifyDecision decision = qualify(h, noise, pred, qualify_params(cfg));

    RequestRecord rec;
    rec.topology_id = h.topology_id;
    rec.round = state.round;
    rec.credible = decision.credible;
    rec.enhanced = !decision.credible;
    rec.criterion_ratio = decision.ratio;
    rec.predicted_power = to_power(pred.mean, cfg.p_max);
    rec.dnn_rate = sum_rate(h, dnn_power(state, features, pred), noise, base);

    const SolverResult cold = wmmse(h, noise, std::nullopt, opts);
    rec.wmmse_rate = sum_rate(h, cold.p, noise, base);
    rec.wmmse_iterations = cold.iterations;

    if (decision.credible) {
        rec.used_power = rec.predicted_power;
        rec.achieved_rate = decision.r_hat;
    } else {
        SolverResult warm = wmmse(h, noise, rec.predicted_power, opts);
        rec.enhance_iterations = warm.iterations;
        rec.used_power = warm.p;
        rec.achieved_rate = sum_rate(h, warm.p, noise, base);
        state.si.push_back({features, warm.p / cfg.p_max});
        ++state.enhanced;
    }
    ++state.requests;
    return {rec.used_power, std::move(rec)};
}

bool maybe_retrain(SelfImproveState& state) {
    if (state.si.size() < state.config.n_si) return false;
    state.base.insert(state.base.end(), std::make_move_iterator(state.si.begin()), std::make_move_iterator(state.si.end()));
    state.si.clear();
    EnsembleTrainReport report;
    state.ensemble = train_models(state.config, state.base, state.round + 1, &report);
    state.training_curves.push_back(std::move(report.histories));
    ++state.round;
    return true;
}

std::uint64_t state_hash(const SelfImproveState& state) {
    Fnv1a h;
    h.update(config_hash(state.config));
    for (const auto& m : state.ensemble.members) {
        const std::uint64_t f = fingerprint(m);
        h.update(&f, sizeof f);
    }
    auto add_samples = [&](const std::vector<LabeledSample>& samples) {
        const std::size_t n = samples.size();
        h.update(&n, sizeof n);
        for (const auto& s : samples) {
            h.update(s.features.data(), static_cast<std::size_t>(s.features.size()) * sizeof(double));
            h.update(s.target.data(), static_cast<std::size_t>(s.target.size()) * sizeof(double));
        }
    };
    add_samples(state.base);
    add_samples(state.si);
    h.update(&state.round, sizeof state.round);
    return h.digest();
}

std::vector<InstanceEval> evaluate_instances(const SelfImproveState& state, std::span<const ChannelInstance> instances) {
    const auto& cfg = state.config;
    const NoiseModel noise = noise_model(cfg);
    const LogBase base = log_base(cfg);
    const WmmseOptions opts = wmmse_options(cfg);
    const QualifyParams qp = qualify_params(cfg);

    std::vector<InstanceEval> out(instances.size());
    parallel_for(instances.size(), cfg.threads, [&](std::size_t i) {
        const ChannelInstance& h = instances[i];
        const Vector features = flatten_gains(h);
        const EnsemblePrediction pred = predict(state.ensemble, features);
        const QualifyDecision decision = qualify(h, noise, pred, qp);
        const PowerVector p_hat = to_power(pred.mean, cfg.p_max);

        InstanceEval& ev = out[i];
        ev.topology_id = h.topology_id;
        ev.ratio = decision.ratio;
        ev.dnn_rate = sum_rate(h, dnn_power(state, features, pred), noise, base);
        ev.predicted_rate = decision.r_hat;

        const SolverResult warm = wmmse(h, noise, p_hat, opts);
        ev.enhanced_rate = sum_rate(h, warm.p, noise, base);
        ev.warm_iterations = warm.iterations;
        const SolverResult cold = wmmse(h, noise, std::nullopt, opts);
        ev.wmmse_rate = sum_rate(h, cold.p, noise, base);
        ev.cold_iterations = cold.iterations;

        ev.max_power_rate = sum_rate(h, max_power(h.n_links(), cfg.p_max), noise, base);
        Rng rng = make_rng(derive_seed(cfg.master_seed, Stream::rand_power, h.seed));
        ev.rand_power_rate = sum_rate(h, rand_power(h.n_links(), rng, cfg.p_max), noise, base);
    });
    return out;
}

std::vector<Sample> apply_gate(std::span<const InstanceEval> evals, double epsilon) {
    std::vector<Sample> samples;
    samples.reserve(evals.size());
    for (const auto& ev : evals) {
        Sample s;
        s.topology_id = ev.topology_id;
        s.criterion_ratio = ev.ratio;
        s.enhanced = !(ev.ratio <= epsilon);
        s.rates[kWmmse] = ev.wmmse_rate;
        s.rates[kSiDnn] = s.enhanced ? ev.enhanced_rate : ev.predicted_rate;
        s.rates[kDnn] = ev.dnn_rate;
        s.rates[kMaxPower] = ev.max_power_rate;
        s.rates[kRandPower] = ev.rand_power_rate;
        s.warm_iterations = s.enhanced ? ev.warm_iterations : -1;
        s.cold_iterations = ev.cold_iterations;
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<SweepMetrics> sweep_epsilon(std::span<const InstanceEval> evals, std::span<const double> epsilons) {
    std::vector<double> sorted(epsilons.begin(), epsilons.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<SweepMetrics> out;
    for (double eps : sorted) out.push_back({eps, summarize(apply_gate(evals, eps))});
    return out;
}

MetricsReport run_experiment(SelfImproveState& state, const StreamSpec& spec,
                             const std::function<void(const RoundMetrics&)>& on_round) {
    const auto& cfg = state.config;
    const NoiseModel noise = noise_model(cfg);
    const LogBase base = log_base(cfg);
    const bool explicit_stream = !spec.instances.empty();
    const std::size_t n_requests = explicit_stream ? spec.instances.size() : spec.n_requests;

    MetricsReport report;
    report.config_hash = config_hash(cfg);

    const std::vector<ChannelInstance> eval_set =
        spec.evaluate_rounds && cfg.eval_size > 0 ? generate_eval_set(cfg) : std::vector<ChannelInstance>{};
    auto start_round = [&] {
        RoundMetrics r;
        r.round = state.round;
        if (!eval_set.empty()) r.eval = summarize(apply_gate(evaluate_instances(state, eval_set), cfg.epsilon));
        return r;
    };

    if (spec.eps_sweep && !cfg.eps_sweep.empty() && n_requests > 0) {
        const std::size_t n_sweep = std::min(n_requests, std::max<std::size_t>(cfg.test_size, 1));
        const auto sweep_set = explicit_stream
                                   ? std::vector<ChannelInstance>(spec.instances.begin(), spec.instances.begin() + static_cast<std::ptrdiff_t>(n_sweep))
                                   : generate_test_stream(cfg, n_sweep);
        report.eps_sweep = sweep_epsilon(evaluate_instances(state, sweep_set), cfg.eps_sweep);
    }

    std::vector<Sample> all;
    std::vector<Sample> this_round;
    RoundMetrics current = start_round();
    auto close_round = [&] {
        current.stream = summarize(this_round);
        if (on_round) on_round(current);
        report.rounds.push_back(std::move(current));
        this_round.clear();
    };

    for (std::size_t i = 0; i < n_requests; ++i) {
        if (spec.stop_after_rounds >= 0 && state.round >= spec.stop_after_rounds) break;
        const ChannelInstance h = explicit_stream ? spec.instances[i]
                                                   : generate_stream(state.topologies, cfg.stream_pattern, 1,
                                                                     cfg.master_seed, Stream::test_stream, i)
                                                         .front();
        const RequestOutcome outcome = handle_request(state, h);
        const RequestRecord& rec = outcome.record;

        Sample s;
        s.topology_id = rec.topology_id;
        s.enhanced = rec.enhanced;
        s.criterion_ratio = rec.criterion_ratio;
        s.rates[kWmmse] = rec.wmmse_rate;
        s.rates[kSiDnn] = rec.achieved_rate;
        s.rates[kDnn] = rec.dnn_rate;
        s.rates[kMaxPower] = sum_rate(h, max_power(h.n_links(), cfg.p_max), noise, base);
        Rng rng = make_rng(derive_seed(cfg.master_seed, Stream::rand_power, h.seed));
        s.rates[kRandPower] = sum_rate(h, rand_power(h.n_links(), rng, cfg.p_max), noise, base);
        s.warm_iterations = rec.enhanced ? rec.enhance_iterations : -1;
        s.cold_iterations = rec.wmmse_iterations;
        all.push_back(s);
        this_round.push_back(std::move(s));

        if (maybe_retrain(state)) {
            close_round();
            current = start_round();
        }
    }
    close_round();

    report.table = summarize(all);
    accumulate_cdf(report, all);
    return report;
}

}  // namespace siim
