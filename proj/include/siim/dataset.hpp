#pragma once

#include "siim/neural.hpp"
#include "siim/random.hpp"
#include "siim/solver.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace siim {

/// One line of a JSON-lines dataset:
///   {"version": 1, "config_hash": "...", "topology_id": "A", "seed": 123,
///    "gains": [[...], ...], "p_star": [...]}
/// p_star is present only in labeled datasets; version and config_hash are
/// optional on input.
struct DatasetRecord {
    ChannelInstance instance;
    std::optional<PowerVector> p_star;
};

inline constexpr int kDatasetFormatVersion = 1;

std::string to_jsonl(const DatasetRecord& record, std::string_view config_hash = {});

/// Accepts gains as nested rows or as a flat row-major array of N*N numbers.
DatasetRecord parse_record(std::string_view line);

void write_dataset(const std::filesystem::path& path, std::span<const DatasetRecord> records,
                   std::string_view config_hash = {});

/// Errors name the file and 1-based line number.
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path);

/// Labels the instance with cold-start WMMSE.
DatasetRecord label(ChannelInstance instance, const NoiseModel& noise, const WmmseOptions& options);

LabeledSample to_sample(const DatasetRecord& record, double p_max);
std::vector<LabeledSample> to_samples(std::span<const DatasetRecord> records, double p_max);

/// count instances of one topology, instance i seeded with
/// derive_seed(master, stream, i). Parallel and sequential runs agree.
std::vector<ChannelInstance> generate_instances(const Topology& topo, std::size_t count, std::uint64_t master,
                                                Stream stream, int threads = 1);

/// Instance i comes from topologies[pattern[i % pattern.size()]], seeded with
/// derive_seed(master, stream, i).
std::vector<ChannelInstance> generate_stream(std::span<const Topology> topologies, std::string_view pattern,
                                             std::size_t count, std::uint64_t master, Stream stream,
                                             std::size_t offset = 0);

std::vector<DatasetRecord> label_all(std::span<const ChannelInstance> instances, const NoiseModel& noise,
                                     const WmmseOptions& options, int threads = 1);

}  // namespace siim
