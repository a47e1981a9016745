#include "siim/dataset.hpp"

#include "siim/errors.hpp"
#include "siim/json_io.hpp"
#include "siim/parallel.hpp"

#include <fstream>
#include <stdexcept>

namespace siim {

using json_io::json;

std::string to_jsonl(const DatasetRecord& record, std::string_view config_hash) {
    json j{
        {"version", kDatasetFormatVersion},
        {"topology_id", record.instance.topology_id},
        {"seed", record.instance.seed},
        {"gains", json_io::from_matrix(record.instance.gains)},
    };
    if (!config_hash.empty()) j["config_hash"] = config_hash;
    if (record.p_star) j["p_star"] = json_io::from_vector(*record.p_star);
    return j.dump();
}

DatasetRecord parse_record(std::string_view line) {
    const json j = json_io::parse(line, "dataset record");
    if (!j.is_object()) throw FormatError("dataset record: expected an object");
    if (j.contains("version")) json_io::require_version(j, kDatasetFormatVersion, "dataset record");
    DatasetRecord rec;
    try {
        rec.instance.topology_id = j.at("topology_id").get<std::string>();
        rec.instance.seed = j.at("seed").get<std::uint64_t>();
        const json& gains = j.at("gains");
        if (!gains.empty() && gains[0].is_array())
            rec.instance.gains = json_io::to_matrix(gains, "gains");
        else
            rec.instance.gains = unflatten_gains(json_io::to_vector(gains, "gains")).gains;
        if (j.contains("p_star")) rec.p_star = json_io::to_vector(j.at("p_star"), "p_star");
    } catch (const json::exception& e) {
        throw FormatError(std::string("dataset record: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("dataset record: ") + e.what());
    }
    try {
        validate(rec.instance);
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("dataset record: ") + e.what());
    }
    if (rec.p_star && rec.p_star->size() != rec.instance.n_links())
        throw FormatError("dataset record: p_star length does not match gains");
    return rec;
}

void write_dataset(const std::filesystem::path& path, std::span<const DatasetRecord> records,
                   std::string_view config_hash) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const auto& r : records) out << to_jsonl(r, config_hash) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset " + path.string());
    std::vector<DatasetRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(parse_record(line));
        } catch (const VersionError& e) {
            throw VersionError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

DatasetRecord label(ChannelInstance instance, const NoiseModel& noise, const WmmseOptions& options) {
    SolverResult r = wmmse(instance, noise, std::nullopt, options);
    return {std::move(instance), std::move(r.p)};
}

LabeledSample to_sample(const DatasetRecord& record, double p_max) {
    if (!record.p_star) throw std::invalid_argument("to_sample: record has no p_star label");
    return {flatten_gains(record.instance), (*record.p_star / p_max).cwiseMax(0.0).cwiseMin(1.0)};
}

std::vector<LabeledSample> to_samples(std::span<const DatasetRecord> records, double p_max) {
    std::vector<LabeledSample> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(to_sample(r, p_max));
    return out;
}

std::vector<ChannelInstance> generate_instances(const Topology& topo, std::size_t count, std::uint64_t master,
                                                Stream stream, int threads) {
    std::vector<ChannelInstance> out(count);
    parallel_for(count, threads, [&](std::size_t i) { out[i] = sample_channel(topo, derive_seed(master, stream, i)); });
    return out;
}

std::vector<ChannelInstance> generate_stream(std::span<const Topology> topologies, std::string_view pattern,
                                             std::size_t count, std::uint64_t master, Stream stream,
                                             std::size_t offset) {
    if (pattern.empty()) throw std::invalid_argument("generate_stream: empty pattern");
    std::vector<ChannelInstance> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t i = offset + k;
        const std::string id(1, pattern[i % pattern.size()]);
        const Topology* topo = nullptr;
        for (const auto& t : topologies)
            if (t.id == id) topo = &t;
        if (!topo) throw std::invalid_argument("generate_stream: no topology with id '" + id + "'");
        out.push_back(sample_channel(*topo, derive_seed(master, stream, i)));
    }
    return out;
}

std::vector<DatasetRecord> label_all(std::span<const ChannelInstance> instances, const NoiseModel& noise,
                                     const WmmseOptions& options, int threads) {
    std::vector<DatasetRecord> out(instances.size());
    parallel_for(instances.size(), threads, [&](std::size_t i) { out[i] = label(instances[i], noise, options); });
    return out;
}

}  // namespace siim
