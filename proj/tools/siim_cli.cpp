#include "siim/config.hpp"
#include "siim/dataset.hpp"
#include "siim/ensemble.hpp"
#include "siim/errors.hpp"
#include "siim/json_io.hpp"
#include "siim/pipeline.hpp"
#include "siim/report.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace siim;

namespace {

// Carries the name of the step that failed up to main's diagnostic.
struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& what) : std::runtime_error(stage + ": " + what) {}
};

template <class F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out;
    std::vector<std::string> overrides;  // key=value, value parsed as JSON when possible
    std::string data_path;
    std::string test_path;
    std::string ensemble_path;
    std::string report_path;
};

ExperimentConfig resolve_config(const Options& o) {
    ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
    if (!o.overrides.empty()) {
        nlohmann::json patch = nlohmann::json::object();
        for (const auto& kv : o.overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
            const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
            auto parsed = nlohmann::json::parse(value, nullptr, false);
            patch[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
        }
        cfg = config_from_json(patch, cfg);
    }
    if (o.seed) cfg.master_seed = *o.seed;
    if (o.threads) cfg.threads = *o.threads;
    if (o.out) cfg.output_dir = *o.out;
    validate(cfg);
    return cfg;
}

fs::path out_dir(const ExperimentConfig& cfg) {
    fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    return dir;
}

std::string path_or(const std::string& given, const fs::path& fallback) {
    return given.empty() ? fallback.string() : given;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_config_snapshot(const ExperimentConfig& cfg, const fs::path& dir) {
    nlohmann::json j = to_json(cfg);
    j["config_hash"] = config_hash(cfg);
    write_text(dir / "config.json", j.dump(2) + "\n");
}

// CSV files lead with a comment line so they carry schema version and config hash.
void prepend_header(const fs::path& path, const std::string& hash) {
    const std::string body = read_text(path);
    write_text(path, "# schema_version=" + std::to_string(kReportSchemaVersion) + " config_hash=" + hash + "\n" + body);
}

void write_report_files(const MetricsReport& report, const fs::path& dir, const std::string& json_name) {
    write_text(dir / json_name, save_report(report) + "\n");
    write_csv_tables(report, dir);
    for (const char* name : {"table1.csv", "cdf_total.csv", "cdf_A.csv", "cdf_B.csv", "eps_sweep.csv", "rounds.csv"})
        prepend_header(dir / name, report.config_hash);
}

void write_training_curves(const std::vector<std::vector<EpochStats>>& histories, int round, const fs::path& path,
                           const std::string& hash) {
    std::ostringstream out;
    out << "# schema_version=" << kReportSchemaVersion << " config_hash=" << hash << "\n";
    out << "round,member,epoch,train_loss,val_loss,val_mse\n";
    for (std::size_t m = 0; m < histories.size(); ++m)
        for (const auto& e : histories[m])
            out << round << ',' << m << ',' << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_mse
                << '\n';
    write_text(path, out.str());
}

std::vector<LabeledSample> load_base(const ExperimentConfig& cfg, const std::string& path) {
    const auto records = read_dataset(path);
    for (const auto& r : records)
        if (!r.p_star) throw FormatError(path + ": record without p_star, training data must be labeled");
    return to_samples(records, cfg.p_max);
}

SelfImproveState load_state(const ExperimentConfig& cfg, const Options& o) {
    const fs::path dir(cfg.output_dir);
    const std::string ens_path = path_or(o.ensemble_path, dir / "ensemble.json");
    Ensemble ensemble = stage("loading ensemble " + ens_path, [&] { return load_ensemble(read_text(ens_path)); });
    const std::string data_path = path_or(o.data_path, dir / "train.jsonl");
    auto base = stage("loading training data " + data_path, [&] { return load_base(cfg, data_path); });
    return stage("building state", [&] { return make_state(cfg, std::move(ensemble), std::move(base)); });
}

std::vector<ChannelInstance> load_stream(const Options& o) {
    if (o.test_path.empty()) return {};
    return stage("loading test stream " + o.test_path, [&] {
        std::vector<ChannelInstance> out;
        for (auto& r : read_dataset(o.test_path)) out.push_back(std::move(r.instance));
        return out;
    });
}

int cmd_gen_data(const Options& o) {
    const ExperimentConfig cfg = stage("config", [&] { return resolve_config(o); });
    const fs::path dir = stage("output directory", [&] { return out_dir(cfg); });
    const std::string hash = config_hash(cfg);
    const auto train = stage("generating training data", [&] { return generate_training_data(cfg); });
    const auto test = stage("generating test data", [&] {
        return label_all(generate_test_stream(cfg, cfg.test_size), noise_model(cfg), wmmse_options(cfg), cfg.threads);
    });
    stage("writing datasets", [&] {
        write_dataset(dir / "train.jsonl", train, hash);
        write_dataset(dir / "test.jsonl", test, hash);
        write_config_snapshot(cfg, dir);
        return 0;
    });
    std::printf("wrote %zu training and %zu test records to %s\n", train.size(), test.size(), dir.string().c_str());
    return 0;
}

int cmd_train(const Options& o) {
    const ExperimentConfig cfg = stage("config", [&] { return resolve_config(o); });
    const fs::path dir = stage("output directory", [&] { return out_dir(cfg); });
    const std::string data_path = path_or(o.data_path, dir / "train.jsonl");
    const auto samples = stage("loading training data " + data_path, [&] { return load_base(cfg, data_path); });
    if (samples.empty()) throw StageError("training", "dataset " + data_path + " is empty");
    EnsembleTrainReport report;
    const Ensemble ensemble = stage("training", [&] { return train_models(cfg, samples, 0, &report); });
    const std::string hash = config_hash(cfg);
    const std::string ens_path = path_or(o.ensemble_path, dir / "ensemble.json");
    stage("writing ensemble", [&] {
        write_text(ens_path, save_ensemble(ensemble, hash) + "\n");
        write_training_curves(report.histories, 0, dir / "training_curves.csv", hash);
        write_config_snapshot(cfg, dir);
        return 0;
    });
    std::printf("trained %zu members on %zu samples; wrote %s\n", ensemble.size(), samples.size(), ens_path.c_str());
    return 0;
}

void write_retrain_curves(const SelfImproveState& state, const fs::path& dir) {
    std::ostringstream all;
    const std::string hash = config_hash(state.config);
    all << "# schema_version=" << kReportSchemaVersion << " config_hash=" << hash << "\n";
    all << "round,member,epoch,train_loss,val_loss,val_mse\n";
    for (std::size_t r = 0; r < state.training_curves.size(); ++r)
        for (std::size_t m = 0; m < state.training_curves[r].size(); ++m)
            for (const auto& e : state.training_curves[r][m])
                all << r + 1 << ',' << m << ',' << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ','
                    << e.val_mse << '\n';
    write_text(dir / "retrain_curves.csv", all.str());
}

int run_stream(const Options& o, bool sweep_only, bool rounds_mode) {
    const ExperimentConfig cfg = stage("config", [&] { return resolve_config(o); });
    const fs::path dir = stage("output directory", [&] { return out_dir(cfg); });
    SelfImproveState state = load_state(cfg, o);
    StreamSpec spec;
    spec.instances = load_stream(o);
    if (spec.instances.empty()) spec.n_requests = rounds_mode ? cfg.max_requests : cfg.test_size;
    if (sweep_only) {
        // Read-only: only the epsilon sweep on the stored models.
        spec.n_requests = spec.instances.empty() ? cfg.test_size : 0;
        spec.stop_after_rounds = 0;
        spec.evaluate_rounds = false;
    }
    if (rounds_mode) {
        spec.stop_after_rounds = cfg.rounds;
        spec.eps_sweep = false;
    } else if (!sweep_only) {
        spec.evaluate_rounds = false;
    }
    MetricsReport report = stage("running stream", [&] {
        return run_experiment(state, spec, [&](const RoundMetrics& r) {
            if (!rounds_mode) return;
            std::fprintf(stderr, "round %d: %zu requests, enhancing rate %.3f\n", r.round, r.stream[0].requests,
                         r.stream[0].enhancing_rate());
        });
    });
    if (sweep_only) {
        // stop_after_rounds = 0 served no requests; keep only the sweep.
        report.rounds.clear();
    }
    const char* json_name = sweep_only ? "eps_sweep.json" : rounds_mode ? "rounds.json" : "report.json";
    stage("writing report", [&] {
        write_report_files(report, dir, json_name);
        if (state.training_curves.size() > 0) write_retrain_curves(state, dir);
        write_config_snapshot(cfg, dir);
        return 0;
    });
    std::cout << format_summary(report);
    return 0;
}

int cmd_report(const Options& o, const std::string& default_dir) {
    const std::string path = path_or(o.report_path, fs::path(o.out.value_or(default_dir)) / "report.json");
    const MetricsReport report = stage("loading report " + path, [&] { return load_report(read_text(path)); });
    std::cout << format_summary(report);
    if (o.out) {
        const fs::path dir(*o.out);
        stage("writing plot data", [&] {
            fs::create_directories(dir);
            write_csv_tables(report, dir);
            for (const char* name : {"table1.csv", "cdf_total.csv", "cdf_A.csv", "cdf_B.csv", "eps_sweep.csv", "rounds.csv"})
                prepend_header(dir / name, report.config_hash);
            return 0;
        });
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-improving interference management: data generation, training, and evaluation"};
    app.require_subcommand(1);
    app.fallthrough();

    Options o;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out;
    app.add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides config)");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads (overrides config)")->check(CLI::PositiveNumber);
    auto* out_opt = app.add_option("--out", out, "output directory (overrides config)");
    app.add_option("--set", o.overrides, "override a config field, key=value (repeatable)");

    auto* gen = app.add_subcommand("gen-data", "generate labeled train (A) and test (A+B) datasets");
    auto* train = app.add_subcommand("train", "train the ensemble on a labeled dataset");
    train->add_option("--data", o.data_path, "training dataset (default <out>/train.jsonl)");
    train->add_option("--ensemble", o.ensemble_path, "ensemble output path (default <out>/ensemble.json)");
    auto* run = app.add_subcommand("run", "run the self-improving stream and write the metrics report");
    auto* sweep_eps = app.add_subcommand("sweep-eps", "enhancing rate and sum-rate for each epsilon in the config");
    auto* sweep_rounds = app.add_subcommand("sweep-rounds", "run until config.rounds retrains, scoring each round");
    for (auto* sub : {run, sweep_eps, sweep_rounds}) {
        sub->add_option("--ensemble", o.ensemble_path, "trained ensemble (default <out>/ensemble.json)");
        sub->add_option("--data", o.data_path, "base dataset for retraining (default <out>/train.jsonl)");
        sub->add_option("--test", o.test_path, "explicit request stream (JSON lines); generated when omitted");
    }
    auto* report = app.add_subcommand("report", "print a metrics report and export plot data");
    report->add_option("--report", o.report_path, "report JSON (default <out>/report.json)");

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) o.seed = seed;
    if (*threads_opt) o.threads = threads;
    if (*out_opt) o.out = out;

    try {
        if (*gen) return cmd_gen_data(o);
        if (*train) return cmd_train(o);
        if (*run) return run_stream(o, false, false);
        if (*sweep_eps) return run_stream(o, true, false);
        if (*sweep_rounds) return run_stream(o, false, true);
        if (*report) return cmd_report(o, ExperimentConfig{}.output_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "siim: %s: %s\n", app.get_subcommands().front()->get_name().c_str(), e.what());
        return 1;
    }
    return 1;
}
