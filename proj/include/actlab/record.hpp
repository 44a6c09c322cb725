#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "actlab/datagen.hpp"
#include "actlab/mlp.hpp"

namespace actlab {

/// Version of the run.json layout. Bumped on any incompatible change.
inline constexpr int kRunRecordSchema = 1;

nlohmann::json to_json(const DatasetSpec& spec);
/// Throws InvalidArgument on missing or mistyped fields.
DatasetSpec spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Target& target);
nlohmann::json to_json(const MlpConfig& cfg);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
/// Throws Io if the file cannot be read.
std::string sha256_file(const std::string& path);

}  // namespace actlab
