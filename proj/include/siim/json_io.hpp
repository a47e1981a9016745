#pragma once

// JSON helpers shared by the model, ensemble, dataset and report formats.

#include "siim/netsim.hpp"

#include <json.hpp>

#include <string_view>

namespace siim {

struct MLPParams;

namespace json_io {

using json = nlohmann::json;

json from_vector(const Vector& v);
json from_matrix(const Matrix& m);  // nested rows
Vector to_vector(const json& j, std::string_view what);
Matrix to_matrix(const json& j, std::string_view what);

/// Parses a whole document; malformed or truncated input raises FormatError.
json parse(std::string_view bytes, std::string_view what);

/// Requires j["version"] == expected, raising VersionError otherwise.
void require_version(const json& j, int expected, std::string_view what);

json model_to_json(const MLPParams& params, std::string_view config_hash);
MLPParams model_from_json(const json& j);

}  // namespace json_io
}  // namespace siim
