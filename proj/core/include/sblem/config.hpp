#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sblem/diagnostics.hpp"
#include "sblem/em.hpp"
#include "sblem/model.hpp"

namespace sblem {

/// Value of a key in the TOML-style run configuration. Only the subset the
/// run configuration needs is supported: integers, floats, booleans, basic
/// strings and (nested) arrays.
struct ConfigValue {
  using Array = std::vector<ConfigValue>;
  std::variant<std::int64_t, double, bool, std::string, Array> data;

  bool is_number() const;
  double as_double(const std::string& key) const;
  std::int64_t as_int(const std::string& key) const;
  bool as_bool(const std::string& key) const;
  const std::string& as_string(const std::string& key) const;
  const Array& as_array(const std::string& key) const;
};

/// section -> key -> value. Top-level keys live in section "".
using ConfigTable = std::map<std::string, std::map<std::string, ConfigValue>>;

/// Throws InvalidArgument with a line number on malformed input or
/// duplicate keys.
ConfigTable parse_config_text(const std::string& text);

struct ModelBlock {
  bool random = true;
  RandomModelSpec random_spec;
  SystemModel explicit_model;
};

struct InitSpec {
  std::optional<Vector> gamma;  // defaults to the 1-vector
  double gamma_scalar = 1.0;
  std::optional<Indicator> z;   // defaults to all ones
  bool z_all_ones = true;
};

struct SweepSpec {
  std::vector<std::uint64_t> seeds;
  std::vector<double> snr_db;  // input_variance = sigma2 * 10^(snr/10)
  std::vector<int> sparsity;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output;
  std::optional<ModelBlock> model;
  std::optional<SimConfig> sim;
  std::optional<std::string> dataset;  // existing dataset directory
  EMOptions em;
  InitSpec init;
  DiagnosticsOptions diagnostics;
  std::vector<std::string> checks;  // empty: all
  SweepSpec sweep;
  std::string source_text;          // verbatim copy for run directories
};

/// Strict parse: unknown sections or keys are rejected. A seed override
/// replaces the global seed before it propagates to model and sim defaults.
RunConfig parse_run_config(const std::string& text,
                           std::optional<std::uint64_t> seed_override = std::nullopt);
RunConfig load_run_config(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override = std::nullopt);

/// Materializes the model block (random draw or explicit matrices).
SystemModel resolve_model(const ModelBlock& block);

/// Simulation settings; the seed falls back to the global seed.
SimConfig resolve_sim(const RunConfig& cfg);

Theta resolve_initial_theta(const InitSpec& init, const SystemModel& model);

/// Names accepted in [diagnostics] checks.
const std::vector<std::string>& known_check_names();

}  // namespace sblem
