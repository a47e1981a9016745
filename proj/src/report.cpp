#include "siim/report.hpp"

#include "siim/errors.hpp"
#include "siim/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace siim {

using nlohmann::json;

namespace {

std::size_t group_of(std::string_view topology_id) {
    for (std::size_t g = 1; g < kNumGroups; ++g)
        if (kGroups[g] == topology_id) return g;
    return 0;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

json group_to_json(const GroupMetrics& g) {
    json mean = json::object();
    json pct = json::object();
    for (std::size_t a = 0; a < kNumAlgorithms; ++a) {
        mean[std::string(kAlgorithms[a])] = g.mean_rate[a];
        pct[std::string(kAlgorithms[a])] = g.percent_of_wmmse(a);
    }
    return {{"requests", g.requests},
            {"enhanced", g.enhanced},
            {"enhancing_rate", g.enhancing_rate()},
            {"mean_rate", mean},
            {"percent_of_wmmse", pct},
            {"median_warm_iterations", g.median_warm_iterations},
            {"median_cold_iterations", g.median_cold_iterations}};
}

GroupMetrics group_from_json(const json& j) {
    GroupMetrics g;
    g.requests = j.at("requests").get<std::size_t>();
    g.enhanced = j.at("enhanced").get<std::size_t>();
    for (std::size_t a = 0; a < kNumAlgorithms; ++a) g.mean_rate[a] = j.at("mean_rate").at(std::string(kAlgorithms[a])).get<double>();
    g.median_warm_iterations = j.at("median_warm_iterations").get<double>();
    g.median_cold_iterations = j.at("median_cold_iterations").get<double>();
    return g;
}

json table_to_json(const GroupTable& t) {
    json out = json::object();
    for (std::size_t g = 0; g < kNumGroups; ++g) out[std::string(kGroups[g])] = group_to_json(t[g]);
    return out;
}

GroupTable table_from_json(const json& j) {
    GroupTable t{};
    for (std::size_t g = 0; g < kNumGroups; ++g) t[g] = group_from_json(j.at(std::string(kGroups[g])));
    return t;
}

std::string fmt(double x, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, x);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

GroupTable summarize(std::span<const Sample> samples) {
    GroupTable t{};
    std::array<std::vector<double>, kNumGroups> warm, cold;
    for (const auto& s : samples) {
        const std::size_t own = group_of(s.topology_id);
        const std::size_t groups[2] = {0, own};
        for (std::size_t k = 0; k < (own == 0 ? 1u : 2u); ++k) {
            const std::size_t g = groups[k];
            auto& m = t[g];
            ++m.requests;
            if (s.enhanced) ++m.enhanced;
            for (std::size_t a = 0; a < kNumAlgorithms; ++a) m.mean_rate[a] += s.rates[a];
            if (s.warm_iterations >= 0) warm[g].push_back(s.warm_iterations);
            if (s.cold_iterations >= 0) cold[g].push_back(s.cold_iterations);
        }
    }
    for (std::size_t g = 0; g < kNumGroups; ++g) {
        auto& m = t[g];
        if (m.requests > 0)
            for (auto& r : m.mean_rate) r /= static_cast<double>(m.requests);
        m.median_warm_iterations = median(warm[g]);
        m.median_cold_iterations = median(cold[g]);
    }
    return t;
}

void accumulate_cdf(MetricsReport& report, std::span<const Sample> samples) {
    for (const auto& s : samples) {
        const std::size_t g = group_of(s.topology_id);
        for (std::size_t a = 0; a < kNumAlgorithms; ++a) {
            report.cdf[0][a].push_back(s.rates[a]);
            if (g != 0) report.cdf[g][a].push_back(s.rates[a]);
        }
    }
    for (auto& group : report.cdf)
        for (auto& rates : group) std::sort(rates.begin(), rates.end());
}

json to_json(const MetricsReport& report) {
    json cdf = json::object();
    for (std::size_t g = 0; g < kNumGroups; ++g) {
        json group = json::object();
        for (std::size_t a = 0; a < kNumAlgorithms; ++a) group[std::string(kAlgorithms[a])] = report.cdf[g][a];
        cdf[std::string(kGroups[g])] = std::move(group);
    }
    json rounds = json::array();
    for (const auto& r : report.rounds) {
        json row{{"round", r.round}, {"stream", table_to_json(r.stream)}};
        row["eval"] = r.eval ? table_to_json(*r.eval) : json(nullptr);
        rounds.push_back(std::move(row));
    }
    json sweep = json::array();
    for (const auto& s : report.eps_sweep) sweep.push_back({{"epsilon", s.epsilon}, {"table", table_to_json(s.table)}});
    return {{"version", report.schema_version},
            {"config_hash", report.config_hash},
            {"algorithms", kAlgorithms},
            {"table", table_to_json(report.table)},
            {"cdf", std::move(cdf)},
            {"rounds", std::move(rounds)},
            {"eps_sweep", std::move(sweep)}};
}

MetricsReport report_from_json(const json& j) {
    json_io::require_version(j, kReportSchemaVersion, "report");
    MetricsReport report;
    try {
        report.config_hash = j.at("config_hash").get<std::string>();
        report.table = table_from_json(j.at("table"));
        for (std::size_t g = 0; g < kNumGroups; ++g)
            for (std::size_t a = 0; a < kNumAlgorithms; ++a)
                report.cdf[g][a] = j.at("cdf").at(std::string(kGroups[g])).at(std::string(kAlgorithms[a])).get<std::vector<double>>();
        for (const auto& r : j.at("rounds")) {
            RoundMetrics row;
            row.round = r.at("round").get<int>();
            row.stream = table_from_json(r.at("stream"));
            if (!r.at("eval").is_null()) row.eval = table_from_json(r.at("eval"));
            report.rounds.push_back(std::move(row));
        }
        for (const auto& s : j.at("eps_sweep"))
            report.eps_sweep.push_back({s.at("epsilon").get<double>(), table_from_json(s.at("table"))});
    } catch (const json::exception& e) {
        throw FormatError(std::string("report: ") + e.what());
    }
    return report;
}

std::string save_report(const MetricsReport& report) {
    return to_json(report).dump(1);
}

MetricsReport load_report(std::string_view bytes) {
    return report_from_json(json_io::parse(bytes, "report"));
}

void write_csv_tables(const MetricsReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    std::ostringstream table1;
    table1 << "algorithm,total,total_pct,A,A_pct,B,B_pct\n";
    for (std::size_t a = 0; a < kNumAlgorithms; ++a) {
        table1 << kAlgorithms[a];
        for (std::size_t g = 0; g < kNumGroups; ++g)
            table1 << ',' << fmt(report.table[g].mean_rate[a]) << ',' << fmt(report.table[g].percent_of_wmmse(a), 2);
        table1 << '\n';
    }
    write_file(dir / "table1.csv", table1.str());

    for (std::size_t g = 0; g < kNumGroups; ++g) {
        std::ostringstream cdf;
        cdf << "algorithm,sum_rate,cdf\n";
        for (std::size_t a = 0; a < kNumAlgorithms; ++a) {
            const auto& rates = report.cdf[g][a];
            for (std::size_t i = 0; i < rates.size(); ++i)
                cdf << kAlgorithms[a] << ',' << fmt(rates[i], 9) << ','
                    << fmt(static_cast<double>(i + 1) / static_cast<double>(rates.size()), 9) << '\n';
        }
        write_file(dir / ("cdf_" + std::string(kGroups[g]) + ".csv"), cdf.str());
    }

    std::ostringstream sweep;
    sweep << "epsilon,enhancing_rate_total,enhancing_rate_A,enhancing_rate_B,si_dnn_total,si_dnn_A,si_dnn_B,"
             "dnn_total,wmmse_total\n";
    for (const auto& s : report.eps_sweep) {
        sweep << s.epsilon;
        for (std::size_t g = 0; g < kNumGroups; ++g) sweep << ',' << fmt(s.table[g].enhancing_rate());
        for (std::size_t g = 0; g < kNumGroups; ++g) sweep << ',' << fmt(s.table[g].mean_rate[kSiDnn]);
        sweep << ',' << fmt(s.table[0].mean_rate[kDnn]) << ',' << fmt(s.table[0].mean_rate[kWmmse]) << '\n';
    }
    write_file(dir / "eps_sweep.csv", sweep.str());

    std::ostringstream rounds;
    rounds << "round,requests,enhanced,enhancing_rate,si_dnn_mean,dnn_mean,"
              "eval_enhancing_rate_total,eval_enhancing_rate_A,eval_enhancing_rate_B,"
              "eval_si_dnn_total,eval_dnn_total,eval_dnn_A,eval_dnn_B,eval_wmmse_total\n";
    for (const auto& r : report.rounds) {
        const auto& s = r.stream[0];
        rounds << r.round << ',' << s.requests << ',' << s.enhanced << ',' << fmt(s.enhancing_rate()) << ','
               << fmt(s.mean_rate[kSiDnn]) << ',' << fmt(s.mean_rate[kDnn]);
        if (r.eval) {
            const auto& e = *r.eval;
            rounds << ',' << fmt(e[0].enhancing_rate()) << ',' << fmt(e[1].enhancing_rate()) << ','
                   << fmt(e[2].enhancing_rate()) << ',' << fmt(e[0].mean_rate[kSiDnn]) << ','
                   << fmt(e[0].mean_rate[kDnn]) << ',' << fmt(e[1].mean_rate[kDnn]) << ','
                   << fmt(e[2].mean_rate[kDnn]) << ',' << fmt(e[0].mean_rate[kWmmse]);
        } else {
            rounds << ",,,,,,,,";
        }
        rounds << '\n';
    }
    write_file(dir / "rounds.csv", rounds.str());
}

std::string format_table(const GroupTable& table) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-10s | %-18s | %-18s | %-18s\n", "Alg.", "Total", "Topology A", "Topology B");
    out << line << std::string(74, '-') << '\n';
    for (std::size_t a = 0; a < kNumAlgorithms; ++a) {
        std::snprintf(line, sizeof line, "%-10s", std::string(kAlgorithms[a]).c_str());
        out << line;
        for (std::size_t g = 0; g < kNumGroups; ++g) {
            std::snprintf(line, sizeof line, " | %7.3f (%6.2f%%)", table[g].mean_rate[a], table[g].percent_of_wmmse(a));
            out << line;
        }
        out << '\n';
    }
    std::snprintf(line, sizeof line, "requests: %zu (A %zu, B %zu), enhancing rate %.2f%% (A %.2f%%, B %.2f%%)\n",
                  table[0].requests, table[1].requests, table[2].requests, 100.0 * table[0].enhancing_rate(),
                  100.0 * table[1].enhancing_rate(), 100.0 * table[2].enhancing_rate());
    out << line;
    return out.str();
}

std::string format_summary(const MetricsReport& report) {
    std::ostringstream out;
    out << "config " << report.config_hash << "\n\n" << format_table(report.table);
    if (!report.eps_sweep.empty()) {
        out << "\nepsilon sweep (round 0)\n";
        for (const auto& s : report.eps_sweep) {
            char line[160];
            std::snprintf(line, sizeof line, "  eps=%-5g enhancing %.3f (A %.3f, B %.3f)  SI-DNN %.4f (%.2f%%)\n",
                          s.epsilon, s.table[0].enhancing_rate(), s.table[1].enhancing_rate(),
                          s.table[2].enhancing_rate(), s.table[0].mean_rate[kSiDnn], s.table[0].percent_of_wmmse(kSiDnn));
            out << line;
        }
    }
    if (!report.rounds.empty()) {
        out << "\nrounds\n";
        for (const auto& r : report.rounds) {
            char line[200];
            std::snprintf(line, sizeof line, "  round %d: %zu requests, enhancing %.3f", r.round, r.stream[0].requests,
                          r.stream[0].enhancing_rate());
            out << line;
            if (r.eval) {
                std::snprintf(line, sizeof line, " | eval enhancing %.3f, DNN A %.4f B %.4f",
                              (*r.eval)[0].enhancing_rate(), (*r.eval)[1].mean_rate[kDnn], (*r.eval)[2].mean_rate[kDnn]);
                out << line;
            }
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace siim
