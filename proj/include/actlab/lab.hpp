#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "actlab/activation.hpp"
#include "actlab/datagen.hpp"
#include "actlab/trial.hpp"

namespace actlab::lab {

using LineFn = std::function<void(const std::string&)>;

struct Outcome {
  std::string run_dir;    // empty when the command wrote nothing
  std::string text;       // plain-text report
  nlohmann::json record;  // contents of run.json, or null
};

/// Command names: eval, evolve, sweep, histogram, export-dataset, replay,
/// zoo-list.
const std::vector<std::string>& command_names();

/// Fills in defaults. Throws InvalidArgument for unknown commands, unknown
/// keys and mistyped values.
nlohmann::json normalize_options(const std::string& command, const nlohmann::json& options);

/// Runs a command. Everything that computes numbers creates a fresh
/// directory under out_dir and writes run.json next to its CSVs.
Outcome run_command(const std::string& command, const nlohmann::json& options,
                    const LineFn& progress = {});

/// Suite names: default, table1 (poly1d and sin_product), smoke (the first
/// four poly1d specs) or a family name. A ":N" suffix keeps the first N.
std::vector<DatasetSpec> resolve_suite(const std::string& name, std::uint64_t seed);

/// A zoo name or a DSL expression.
Activation resolve_activation(const std::string& name_or_expr);

/// Sample statistics; sd is 0 for fewer than two values.
struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};
MeanSd mean_sd(const std::vector<double>& v);

/// Creates <out_dir>/<UTC timestamp>-<8 hex>/; fails if it already exists.
std::string create_run_dir(const std::string& out_dir, const std::string& salt);

/// RFC 4180 field quoting.
std::string csv_field(const std::string& s);

}  // namespace actlab::lab
