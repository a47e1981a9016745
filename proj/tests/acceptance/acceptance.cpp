// Prints one PASS/FAIL line per acceptance criterion and exits nonzero if any fails.
//   siim_acceptance [--only 1,2,...] [--threads N]
#include "siim/config.hpp"
#include "siim/ensemble.hpp"
#include "siim/netsim.hpp"
#include "siim/neural.hpp"
#include "siim/pipeline.hpp"
#include "siim/qualify.hpp"
#include "siim/random.hpp"
#include "siim/report.hpp"
#include "siim/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace siim;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string f(const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

// 1. WMMSE vs exhaustive grid; monotone objective trace.
Outcome solver_correctness() {
    const NoiseModel noise{1e-4};
    double ratio_sum = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Topology topo = make_topology(2, derive_seed(101, Stream::topology, i), "A");
        const ChannelInstance h = sample_channel(topo, derive_seed(101, Stream::test_stream, i));
        const double w = sum_rate(h, wmmse(h, noise).p, noise);
        const double g = sum_rate(h, grid_oracle(h, noise, 201).p, noise);
        ratio_sum += w / g;
    }
    const double mean_ratio = ratio_sum / 200.0;

    int violations = 0;
    double worst_drop = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Topology topo = make_topology(10, derive_seed(102, Stream::topology, i), "A");
        const ChannelInstance h = sample_channel(topo, derive_seed(102, Stream::test_stream, i));
        const NoiseModel nm{i % 2 == 0 ? 1e-4 : 1.0};
        const auto trace = wmmse(h, nm).objective_trace;
        for (std::size_t k = 1; k < trace.size(); ++k) {
            const double drop = trace[k - 1] - trace[k];
            worst_drop = std::max(worst_drop, drop);
            if (drop > 1e-9) ++violations;
        }
    }
    return {mean_ratio >= 0.95 && violations == 0,
            f("mean WMMSE/grid ratio %.4f (>= 0.95); trace violations %d, worst drop %.2e", mean_ratio, violations,
              worst_drop)};
}

// 2. Analytic gradient of the NLL loss vs central differences.
Outcome gradient_correctness() {
    double worst = 0.0;
    for (int net = 0; net < 20; ++net) {
        std::mt19937_64 rng(derive_seed(202, Stream::member_init, net));
        std::uniform_int_distribution<int> width(2, 6);
        const Index in = width(rng), out = width(rng) / 2 + 1;
        std::vector<Index> dims{in};
        const int hidden = 1 + net % 3;
        for (int l = 0; l < hidden; ++l) dims.push_back(width(rng));
        dims.push_back(2 * out);
        const Activation act = net % 2 == 0 ? Activation::tanh : Activation::relu;
        MLPParams params = init_params(dims, derive_seed(202, Stream::member_init, 100 + net), act);
        std::normal_distribution<double> n01;
        for (auto& layer : params.layers) layer.bias = layer.bias.unaryExpr([&](double) { return 0.1 * n01(rng); });

        std::vector<LabeledSample> batch(4);
        std::uniform_real_distribution<double> u01;
        for (auto& s : batch) {
            s.features = Vector::NullaryExpr(in, [&] { return n01(rng); });
            s.target = Vector::NullaryExpr(out, [&] { return u01(rng); });
        }
        const LossGrad analytic = backward(params, batch, 0.0);

        auto loss_at = [&](const MLPParams& p) { return backward(p, batch, 0.0).loss; };
        const double h = 1e-6;
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            auto check = [&](auto&& get, double g_analytic) {
                MLPParams plus = params, minus = params;
                get(plus) += h;
                get(minus) -= h;
                const double numeric = (loss_at(plus) - loss_at(minus)) / (2 * h);
                const double rel = std::abs(numeric - g_analytic) / std::max({std::abs(numeric), std::abs(g_analytic), 1e-6});
                worst = std::max(worst, rel);
            };
            const auto& W = params.layers[l].weight;
            for (Index r = 0; r < W.rows(); ++r)
                for (Index c = 0; c < W.cols(); ++c)
                    check([&](MLPParams& p) -> double& { return p.layers[l].weight(r, c); }, analytic.grads[l].weight(r, c));
            for (Index r = 0; r < W.rows(); ++r)
                check([&](MLPParams& p) -> double& { return p.layers[l].bias(r); }, analytic.grads[l].bias(r));
        }
    }
    return {worst < 1e-4, f("max relative error %.3e over 20 nets (< 1e-4)", worst)};
}

// 3. total = aleatoric + epistemic, epistemic >= 0.
Outcome decomposition_identity() {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u01;
    std::uniform_int_distribution<int> members(1, 8), links(1, 12);
    double worst_identity = 0.0, most_negative = 0.0;
    for (int t = 0; t < 10000; ++t) {
        const int m = members(rng), n = links(rng);
        std::vector<HeadOutput> heads(m);
        const bool near_identical = t % 4 == 0;
        Vector base = Vector::NullaryExpr(n, [&] { return u01(rng); });
        for (auto& hd : heads) {
            hd.mu = near_identical ? Vector(base.array() + 1e-12 * u01(rng))
                                     : Vector::NullaryExpr(n, [&] { return u01(rng); });
            hd.sigma2 = Vector::NullaryExpr(n, [&] { return 1e-6 + u01(rng); });
        }
        const EnsemblePrediction p = combine(heads);
        worst_identity = std::max(worst_identity, (p.total_var - p.aleatoric_var - p.epistemic_var).cwiseAbs().maxCoeff());
        most_negative = std::min(most_negative, p.epistemic_var.minCoeff());
    }
    return {worst_identity <= 1e-12 && most_negative >= 0.0,
            f("max |total - aleatoric - epistemic| %.2e, min epistemic %.2e", worst_identity, most_negative)};
}

EnsemblePrediction random_prediction(std::mt19937_64& rng, Index n, double spread) {
    std::uniform_real_distribution<double> u01;
    EnsemblePrediction p;
    p.mean = Vector::NullaryExpr(n, [&] { return u01(rng); });
    p.aleatoric_var = Vector::NullaryExpr(n, [&] { return 0.01 * u01(rng); });
    p.epistemic_var = Vector::NullaryExpr(n, [&] { return spread * u01(rng) * u01(rng); });
    p.total_var = p.aleatoric_var + p.epistemic_var;
    return p;
}

// 4. Monotone in epsilon and alpha; alpha = 0 always credible.
Outcome criterion_properties() {
    std::mt19937_64 rng(404);
    const NoiseModel noise{1e-4};
    const std::vector<double> eps{1e-4, 1e-3, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 10.0};
    const std::vector<double> alphas{0.0, 0.5, 1.0, 1.96, 3.0, 10.0};
    int eps_viol = 0, alpha_viol = 0, alpha0_viol = 0, box_viol = 0, gate_viol = 0, trials = 0;
    for (int t = 0; t < 500; ++t) {
        const Index n = 2 + t % 9;
        const ChannelInstance h =
            sample_channel(make_topology(n, derive_seed(404, Stream::topology, t), "A"), derive_seed(404, Stream::test_stream, t));
        const EnsemblePrediction pred = random_prediction(rng, n, t % 3 == 0 ? 1e-4 : 0.05);
        for (double a : alphas) {
            bool prev = false;
            for (double e : eps) {
                const bool c = qualify(h, noise, pred, {a, e, 1.0, LogBase::natural}).credible;
                if (prev && !c) ++eps_viol;
                prev = c;
                ++trials;
            }
        }
        std::optional<FeasibleSet> prev_set;
        for (double a : alphas) {
            const FeasibleSet fs = confidence_intervals(pred, a, 1.0);
            if ((fs.lower.array() < 0.0).any() || (fs.upper.array() > 1.0).any() || (fs.lower.array() > fs.upper.array()).any())
                ++box_viol;
            if (prev_set && ((fs.lower.array() > prev_set->lower.array()).any() ||
                             (fs.upper.array() < prev_set->upper.array()).any()))
                ++alpha_viol;
            prev_set = fs;
        }
        for (double e : eps) {
            const auto d = qualify(h, noise, pred, {1.96, e, 1.0, LogBase::natural});
            if (d.ratio < 0.0 || d.credible != (d.ratio <= e)) ++gate_viol;
            if (!qualify(h, noise, pred, {0.0, e, 1.0, LogBase::natural}).credible) ++alpha0_viol;
        }
    }
    return {eps_viol == 0 && alpha_viol == 0 && alpha0_viol == 0 && box_viol == 0 && gate_viol == 0,
            f("%d eps-ladder decisions: eps violations %d; feasible-set nesting violations in alpha %d; "
              "box violations %d; gate violations %d; alpha=0 not credible %d",
              trials, eps_viol, alpha_viol, box_viol, gate_viol, alpha0_viol)};
}

ExperimentConfig desk_config() {
    ExperimentConfig cfg;
    cfg.n_links = 10;
    cfg.train_size = 5000;
    cfg.test_size = 2000;
    cfg.eval_size = 2000;
    cfg.ensemble_size = 5;
    cfg.hidden_dims = {200, 200, 100};
    return cfg;
}

struct DeskRun {
    SelfImproveState state;
    MetricsReport report;
    double train_seconds = 0.0;
    double run_seconds = 0.0;
};

// 5 and 6 share one training stage and one stream.
DeskRun desk_run(int threads) {
    ExperimentConfig cfg = desk_config();
    cfg.threads = threads;
    DeskRun run;
    auto t0 = Clock::now();
    run.state = training_stage(cfg);
    run.train_seconds = seconds_since(t0);
    t0 = Clock::now();
    StreamSpec spec;
    spec.n_requests = cfg.test_size;
    spec.evaluate_rounds = false;
    SelfImproveState live = run.state;
    run.report = run_experiment(live, spec);
    run.run_seconds = seconds_since(t0);
    return run;
}

Outcome table_ordering(const DeskRun& run) {
    const auto& t = run.report.table;
    const auto& m = t[0].mean_rate;
    const bool ordered = m[kWmmse] >= m[kSiDnn] && m[kSiDnn] >= m[kDnn] && m[kDnn] >= m[kMaxPower] &&
                         m[kMaxPower] >= m[kRandPower];
    const double si_pct = t[0].percent_of_wmmse(kSiDnn);
    const double gap = t[1].percent_of_wmmse(kDnn) - t[2].percent_of_wmmse(kDnn);
    return {ordered && si_pct >= 94.0 && gap >= 3.0,
            f("WMMSE %.4f SI-DNN %.4f (%.2f%%) DNN %.4f MaxPower %.4f RandPower %.4f; ordering %s; "
              "DNN A %.2f%% vs B %.2f%% (gap %.2fpp); train %.0fs run %.0fs",
              m[kWmmse], m[kSiDnn], si_pct, m[kDnn], m[kMaxPower], m[kRandPower], ordered ? "ok" : "violated",
              t[1].percent_of_wmmse(kDnn), t[2].percent_of_wmmse(kDnn), gap, run.train_seconds, run.run_seconds)};
}

Outcome gate_discrimination(const DeskRun& run) {
    const SweepMetrics* at = nullptr;
    const SweepMetrics* lo = nullptr;
    const SweepMetrics* hi = nullptr;
    for (const auto& s : run.report.eps_sweep) {
        if (std::abs(s.epsilon - 0.2) < 1e-12) at = &s;
        if (std::abs(s.epsilon - 0.01) < 1e-12) lo = &s;
        if (std::abs(s.epsilon - 0.5) < 1e-12) hi = &s;
    }
    if (!at || !lo || !hi) return {false, "eps sweep missing 0.01, 0.2 or 0.5"};
    const bool enough = at->table[1].requests >= 1000 && at->table[2].requests >= 1000;
    const double ea = at->table[1].enhancing_rate(), eb = at->table[2].enhancing_rate();
    const double e_lo = lo->table[0].enhancing_rate(), e_hi = hi->table[0].enhancing_rate();
    return {enough && eb > ea && e_lo > e_hi,
            f("eps=0.2: B %.3f > A %.3f over %zu/%zu requests; eps=0.01 %.3f > eps=0.5 %.3f", eb, ea,
              at->table[2].requests, at->table[1].requests, e_lo, e_hi)};
}

// 8. Uses the criterion-5 models on 1000 fresh instances.
Outcome warm_start_economy(const DeskRun& run) {
    const auto t0 = Clock::now();
    const auto instances = generate_test_stream(run.state.config, 1000, 500000);
    const auto evals = evaluate_instances(run.state, instances);
    std::vector<double> warm, cold;
    for (const auto& e : evals) {
        warm.push_back(e.warm_iterations);
        cold.push_back(e.cold_iterations);
    }
    auto med = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    };
    const double mw = med(warm), mc = med(cold);
    return {mw < mc, f("median iterations warm %.1f < cold %.1f over %zu instances (%.0fs, stop rule %s)", mw, mc,
                       evals.size(), seconds_since(t0), run.state.config.wmmse_stop.c_str())};
}

// 7. Retrain rounds with N_SI = 500, scored on the fixed evaluation set.
Outcome self_improvement(int threads) {
    ExperimentConfig cfg = desk_config();
    cfg.threads = threads;
    cfg.n_si = 500;
    const auto t0 = Clock::now();
    SelfImproveState state = training_stage(cfg);
    StreamSpec spec;
    spec.n_requests = cfg.max_requests;
    spec.stop_after_rounds = 3;
    spec.eps_sweep = false;
    const MetricsReport report = run_experiment(state, spec, [](const RoundMetrics& r) {
        if (r.eval)
            std::fprintf(stderr, "  [7] round %d: eval enhancing %.3f, DNN B %.4f, stream requests %zu\n", r.round,
                         (*r.eval)[0].enhancing_rate(), (*r.eval)[2].mean_rate[kDnn], r.stream[0].requests);
    });
    const RoundMetrics* r0 = nullptr;
    const RoundMetrics* r3 = nullptr;
    for (const auto& r : report.rounds) {
        if (r.round == 0) r0 = &r;
        if (r.round == 3) r3 = &r;
    }
    if (!r0 || !r3 || !r0->eval || !r3->eval) return {false, f("only %d retrain rounds completed", state.round)};
    const double e0 = (*r0->eval)[0].enhancing_rate(), e3 = (*r3->eval)[0].enhancing_rate();
    const double b0 = (*r0->eval)[2].mean_rate[kDnn], b3 = (*r3->eval)[2].mean_rate[kDnn];
    return {e3 < e0 && b3 > b0,
            f("enhancing rate round 0 %.3f -> round 3 %.3f; DNN mean rate on B %.4f -> %.4f; %zu requests, %.0fs", e0,
              e3, b0, b3, report.table[0].requests, seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    int threads = 1;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
        } else if (!std::strcmp(argv[i], "--threads") && i + 1 < argc) {
            threads = std::max(1, std::atoi(argv[++i]));
        } else {
            std::fprintf(stderr, "usage: %s [--only 1,2,...] [--threads N]\n", argv[0]);
            return 2;
        }
    }
    auto want = [&](int c) { return only.empty() || only.count(c) > 0; };

    int failures = 0;
    auto report = [&](int id, const char* name, const Outcome& o) {
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    };
    auto timed = [&](int id, const char* name, auto&& fn) {
        if (!want(id)) return;
        const auto t0 = Clock::now();
        Outcome o = fn();
        o.detail += f(" [%.1fs]", seconds_since(t0));
        report(id, name, o);
    };

    timed(1, "solver correctness", solver_correctness);
    timed(2, "gradient correctness", gradient_correctness);
    timed(3, "variance decomposition", decomposition_identity);
    timed(4, "criterion properties", criterion_properties);

    if (want(5) || want(6) || want(8)) {
        const DeskRun run = desk_run(threads);
        if (want(5)) report(5, "table-1 ordering", table_ordering(run));
        if (want(6)) report(6, "gate discrimination", gate_discrimination(run));
        timed(8, "warm-start economy", [&] { return warm_start_economy(run); });
    }
    timed(7, "self-improvement", [&] { return self_improvement(threads); });

    return failures == 0 ? 0 : 1;
}
