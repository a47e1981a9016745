#include "siim/config.hpp"
#include "siim/ensemble.hpp"
#include "siim/errors.hpp"
#include "siim/netsim.hpp"
#include "siim/pipeline.hpp"
#include "siim/qualify.hpp"
#include "siim/report.hpp"
#include "siim/solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace siim;

namespace {

ChannelInstance as_instance(const Matrix& gains) {
    ChannelInstance h;
    h.gains = gains;
    validate(h);
    return h;
}

LogBase parse_base(const std::string& s) {
    if (s == "e") return LogBase::natural;
    if (s == "2") return LogBase::two;
    throw std::invalid_argument("log_base must be 'e' or '2'");
}

ExperimentConfig config_from_str(const std::string& text) {
    return config_from_json(nlohmann::json::parse(text.empty() ? "{}" : text));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Interference management with self-improving deep ensembles";

    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_NotImplementedError);

    py::class_<Topology>(m, "Topology")
        .def_readonly("id", &Topology::id)
        .def_readonly("dist", &Topology::dist)
        .def_property_readonly("n_links", &Topology::n_links);
    py::class_<ChannelInstance>(m, "ChannelInstance")
        .def_readonly("topology_id", &ChannelInstance::topology_id)
        .def_readonly("seed", &ChannelInstance::seed)
        .def_readonly("gains", &ChannelInstance::gains)
        .def_property_readonly("n_links", &ChannelInstance::n_links);

    m.def("make_topology", &make_topology, py::arg("n_links"), py::arg("seed"), py::arg("id") = "A");
    m.def("sample_channel", &sample_channel, py::arg("topology"), py::arg("seed"));
    m.def(
        "sum_rate",
        [](const Matrix& gains, const Vector& p, double sigma2, const std::string& base) {
            return sum_rate(as_instance(gains), p, NoiseModel{sigma2}, parse_base(base));
        },
        py::arg("gains"), py::arg("p"), py::arg("sigma2") = 1.0, py::arg("log_base") = "e");
    m.def(
        "sinr",
        [](const Matrix& gains, const Vector& p, Index n, double sigma2) {
            return sinr(as_instance(gains), p, n, NoiseModel{sigma2});
        },
        py::arg("gains"), py::arg("p"), py::arg("n"), py::arg("sigma2") = 1.0);

    py::class_<SolverResult>(m, "SolverResult")
        .def_readonly("p", &SolverResult::p)
        .def_readonly("iterations", &SolverResult::iterations)
        .def_readonly("objective_trace", &SolverResult::objective_trace);
    m.def(
        "wmmse",
        [](const Matrix& gains, double sigma2, std::optional<Vector> p_init, int max_iter, double tol, double p_max,
           const std::string& stop) {
            WmmseOptions opt{max_iter, tol, p_max, StopRule::amplitude};
            if (stop == "objective") opt.stop_rule = StopRule::objective;
            else if (stop != "amplitude") throw std::invalid_argument("stop must be 'amplitude' or 'objective'");
            return wmmse(as_instance(gains), NoiseModel{sigma2}, p_init, opt);
        },
        py::arg("gains"), py::arg("sigma2") = 1.0, py::arg("p_init") = py::none(), py::arg("max_iter") = 500,
        py::arg("tol") = 1e-5, py::arg("p_max") = 1.0, py::arg("stop") = "amplitude");
    m.def(
        "grid_oracle",
        [](const Matrix& gains, double sigma2, int levels, double p_max) {
            return grid_oracle(as_instance(gains), NoiseModel{sigma2}, levels, p_max);
        },
        py::arg("gains"), py::arg("sigma2") = 1.0, py::arg("levels") = 201, py::arg("p_max") = 1.0);

    py::class_<EnsemblePrediction>(m, "EnsemblePrediction")
        .def(py::init([](Vector mean, Vector aleatoric, Vector epistemic) {
                 return EnsemblePrediction{mean, aleatoric, epistemic, aleatoric + epistemic};
             }),
             py::arg("mean"), py::arg("aleatoric_var"), py::arg("epistemic_var"))
        .def_readonly("mean", &EnsemblePrediction::mean)
        .def_readonly("aleatoric_var", &EnsemblePrediction::aleatoric_var)
        .def_readonly("epistemic_var", &EnsemblePrediction::epistemic_var)
        .def_readonly("total_var", &EnsemblePrediction::total_var);
    m.def(
        "combine",
        [](const std::vector<Vector>& mus, const std::vector<Vector>& sigma2s) {
            if (mus.size() != sigma2s.size()) throw std::invalid_argument("combine: length mismatch");
            std::vector<HeadOutput> heads;
            for (std::size_t i = 0; i < mus.size(); ++i) heads.push_back({mus[i], sigma2s[i]});
            return combine(heads);
        },
        py::arg("means"), py::arg("variances"));

    py::class_<Ensemble>(m, "Ensemble")
        .def_property_readonly("size", &Ensemble::size)
        .def_property_readonly("input_dim", &Ensemble::input_dim)
        .def("predict", [](const Ensemble& e, const Matrix& gains) { return predict(e, flatten_gains(as_instance(gains))); })
        .def("to_json", [](const Ensemble& e, const std::string& hash) { return save_ensemble(e, hash); },
             py::arg("config_hash") = "");
    m.def("load_ensemble", [](const std::string& text) { return load_ensemble(text); });

    py::class_<QualifyDecision>(m, "QualifyDecision")
        .def_readonly("credible", &QualifyDecision::credible)
        .def_readonly("r_hat", &QualifyDecision::r_hat)
        .def_readonly("r_upper", &QualifyDecision::r_upper)
        .def_readonly("r_lower", &QualifyDecision::r_lower)
        .def_readonly("ratio", &QualifyDecision::ratio)
        .def_property_readonly("lower", [](const QualifyDecision& d) { return d.feasible_set.lower; })
        .def_property_readonly("upper", [](const QualifyDecision& d) { return d.feasible_set.upper; });
    m.def("maxdist", &maxdist);
    m.def(
        "qualify",
        [](const Matrix& gains, const EnsemblePrediction& pred, double alpha, double epsilon, double sigma2,
           double p_max) { return qualify(as_instance(gains), NoiseModel{sigma2}, pred, {alpha, epsilon, p_max}); },
        py::arg("gains"), py::arg("prediction"), py::arg("alpha") = 1.96, py::arg("epsilon") = 0.2,
        py::arg("sigma2") = 1.0, py::arg("p_max") = 1.0);

    m.def("default_config", [] { return to_json(ExperimentConfig{}).dump(); });
    m.def("config_hash", [](const std::string& text) { return config_hash(config_from_str(text)); },
          py::arg("config_json") = "");

    py::class_<SelfImproveState>(m, "State")
        .def_readonly("round", &SelfImproveState::round)
        .def_readonly("requests", &SelfImproveState::requests)
        .def_readonly("enhanced", &SelfImproveState::enhanced)
        .def_readonly("ensemble", &SelfImproveState::ensemble)
        .def_property_readonly("base_size", [](const SelfImproveState& s) { return s.base.size(); })
        .def_property_readonly("si_size", [](const SelfImproveState& s) { return s.si.size(); })
        .def("hash", [](const SelfImproveState& s) { return state_hash(s); });
    m.def(
        "training_stage", [](const std::string& text) { return training_stage(config_from_str(text)); },
        py::arg("config_json") = "", py::call_guard<py::gil_scoped_release>());
    m.def(
        "run_experiment",
        [](SelfImproveState& state, std::size_t n_requests, int stop_after_rounds, bool eps_sweep,
           bool evaluate_rounds) {
            StreamSpec spec;
            spec.n_requests = n_requests;
            spec.stop_after_rounds = stop_after_rounds;
            spec.eps_sweep = eps_sweep;
            spec.evaluate_rounds = evaluate_rounds;
            return save_report(run_experiment(state, spec));
        },
        py::arg("state"), py::arg("n_requests"), py::arg("stop_after_rounds") = -1, py::arg("eps_sweep") = true,
        py::arg("evaluate_rounds") = false, py::call_guard<py::gil_scoped_release>(),
        "Runs the request stream and returns the metrics report as a JSON string.");
}
