#pragma once

#include <json.hpp>

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace siim {

inline constexpr std::size_t kNumAlgorithms = 5;
inline constexpr std::array<std::string_view, kNumAlgorithms> kAlgorithms{"WMMSE", "SI-DNN", "DNN", "MaxPower",
                                                                          "RandPower"};
enum Algorithm : std::size_t { kWmmse = 0, kSiDnn = 1, kDnn = 2, kMaxPower = 3, kRandPower = 4 };

inline constexpr std::size_t kNumGroups = 3;
inline constexpr std::array<std::string_view, kNumGroups> kGroups{"total", "A", "B"};

/// Per-instance outcome, the unit all tables are aggregated from.
struct Sample {
    std::string topology_id;
    bool enhanced = false;
    double criterion_ratio = 0.0;
    std::array<double, kNumAlgorithms> rates{};
    int warm_iterations = -1;  // -1 when no warm start was run
    int cold_iterations = -1;
};

struct GroupMetrics {
    std::size_t requests = 0;
    std::size_t enhanced = 0;
    std::array<double, kNumAlgorithms> mean_rate{};
    double median_warm_iterations = 0.0;
    double median_cold_iterations = 0.0;

    double enhancing_rate() const { return requests ? static_cast<double>(enhanced) / requests : 0.0; }
    /// 100 * mean / WMMSE mean; 0 when the reference is 0.
    double percent_of_wmmse(std::size_t alg) const {
        return mean_rate[kWmmse] > 0.0 ? 100.0 * mean_rate[alg] / mean_rate[kWmmse] : 0.0;
    }
};

using GroupTable = std::array<GroupMetrics, kNumGroups>;

GroupTable summarize(std::span<const Sample> samples);

struct RoundMetrics {
    int round = 0;
    GroupTable stream{};              // requests served while this round's models were live
    std::optional<GroupTable> eval;   // fixed evaluation set, scored when the round began
};

struct SweepMetrics {
    double epsilon = 0.0;
    GroupTable table{};
};

inline constexpr int kReportSchemaVersion = 1;

struct MetricsReport {
    int schema_version = kReportSchemaVersion;
    std::string config_hash;
    GroupTable table{};
    // Sorted rates per group per algorithm, for CDF plots.
    std::array<std::array<std::vector<double>, kNumAlgorithms>, kNumGroups> cdf;
    std::vector<RoundMetrics> rounds;
    std::vector<SweepMetrics> eps_sweep;
};

void accumulate_cdf(MetricsReport& report, std::span<const Sample> samples);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

std::string save_report(const MetricsReport& report);
MetricsReport load_report(std::string_view bytes);

/// table1.csv, cdf_{total,A,B}.csv, eps_sweep.csv, rounds.csv
void write_csv_tables(const MetricsReport& report, const std::filesystem::path& dir);

std::string format_table(const GroupTable& table);
std::string format_summary(const MetricsReport& report);

}  // namespace siim
