#include "siim/json_io.hpp"

#include "siim/errors.hpp"
#include "siim/neural.hpp"

#include <cmath>
#include <string>

namespace siim::json_io {

json from_vector(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json from_matrix(const Matrix& m) {
    json out = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

Vector to_vector(const json& j, std::string_view what) {
    if (!j.is_array()) throw FormatError(std::string(what) + ": expected an array of numbers");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw FormatError(std::string(what) + ": non-numeric entry at index " + std::to_string(i));
        v(static_cast<Index>(i)) = j[i].get<double>();
    }
    return v;
}

Matrix to_matrix(const json& j, std::string_view what) {
    if (!j.is_array()) throw FormatError(std::string(what) + ": expected a nested array");
    const auto rows = static_cast<Index>(j.size());
    if (rows == 0) return Matrix(0, 0);
    if (!j[0].is_array()) throw FormatError(std::string(what) + ": expected a nested array");
    const auto cols = static_cast<Index>(j[0].size());
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols)
            throw FormatError(std::string(what) + ": ragged row " + std::to_string(r));
        for (Index c = 0; c < cols; ++c) {
            const auto& x = row[static_cast<std::size_t>(c)];
            if (!x.is_number()) throw FormatError(std::string(what) + ": non-numeric entry");
            m(r, c) = x.get<double>();
        }
    }
    return m;
}

json parse(std::string_view bytes, std::string_view what) {
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw FormatError(std::string(what) + ": malformed document (" + e.what() + ")");
    }
}

void require_version(const json& j, int expected, std::string_view what) {
    if (!j.is_object() || !j.contains("version") || !j["version"].is_number_integer())
        throw FormatError(std::string(what) + ": missing integer 'version' field");
    const int found = j["version"].get<int>();
    if (found != expected)
        throw VersionError(std::string(what) + ": unsupported version " + std::to_string(found) + " (expected " +
                           std::to_string(expected) + ")");
}

json model_to_json(const MLPParams& params, std::string_view config_hash) {
    json layers = json::array();
    for (const auto& layer : params.layers)
        layers.push_back({{"weight", from_matrix(layer.weight)}, {"bias", from_vector(layer.bias)}});
    return {
        {"version", kModelFormatVersion},
        {"layer_dims", params.layer_dims},
        {"activation", to_string(params.activation)},
        {"input_shift", from_vector(params.input_shift)},
        {"input_scale", from_vector(params.input_scale)},
        {"weights", std::move(layers)},
        {"created_from_config_hash", std::string(config_hash)},
    };
}

MLPParams model_from_json(const json& j) {
    require_version(j, kModelFormatVersion, "model");
    MLPParams params;
    try {
        params.layer_dims = j.at("layer_dims").get<std::vector<Index>>();
        params.activation = activation_from_string(j.at("activation").get<std::string>());
        params.input_shift = to_vector(j.at("input_shift"), "model.input_shift");
        params.input_scale = to_vector(j.at("input_scale"), "model.input_scale");
        const auto& layers = j.at("weights");
        if (!layers.is_array()) throw FormatError("model: 'weights' must be an array");
        for (const auto& layer : layers)
            params.layers.push_back({to_matrix(layer.at("weight"), "model.weight"), to_vector(layer.at("bias"), "model.bias")});
    } catch (const json::exception& e) {
        throw FormatError(std::string("model: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("model: ") + e.what());
    }

    const auto& dims = params.layer_dims;
    if (dims.size() < 2 || dims.back() % 2 != 0 || params.layers.size() != dims.size() - 1)
        throw FormatError("model: layer_dims inconsistent with weights");
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        if (layer.weight.rows() != dims[l + 1] || layer.weight.cols() != dims[l] || layer.bias.size() != dims[l + 1])
            throw FormatError("model: layer " + std::to_string(l) + " shape does not match layer_dims");
        if (!layer.weight.allFinite() || !layer.bias.allFinite())
            throw FormatError("model: non-finite parameter in layer " + std::to_string(l));
    }
    if (params.input_shift.size() != dims.front() || params.input_scale.size() != dims.front())
        throw FormatError("model: input standardization length does not match input width");
    return params;
}

}  // namespace siim::json_io
