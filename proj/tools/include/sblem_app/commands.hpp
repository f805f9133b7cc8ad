#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sblem/model.hpp"

namespace sblem::app {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kIoError = 3,
  kNumericalError = 4,
  kDiagnosticsFailed = 5,
  kSizeCap = 6,
};

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 0;  // 0: hardware concurrency
  bool debug_dumps = false;
};

/// Accuracy figures written to metrics.json by `run`.
struct RunMetrics {
  double nmse = 0.0;          // ||Xhat - X||_F^2 / ||X||_F^2, smoothed means
  double z_accuracy = 0.0;    // fraction of k with z_k == z*_k
  double support_precision = 0.0;
  double support_recall = 0.0;
  bool support_exact = false;
  std::vector<int> support_estimated;  // gamma_i > 1e-6 max gamma
  std::vector<int> support_true;
};

RunMetrics compute_metrics(const SystemModel& model, const Dataset& data, const Theta& theta);

/// Each command reports progress and errors on `log` and returns an exit
/// code; library exceptions are mapped to codes, never propagated.
int cmd_simulate(const CommandOptions& opts, std::ostream& log);
int cmd_run(const CommandOptions& opts, std::ostream& log);
int cmd_diagnose(const std::filesystem::path& run_dir, const CommandOptions& opts,
                 std::ostream& log);
int cmd_oracle(const std::filesystem::path& run_dir, const CommandOptions& opts,
               std::ostream& log);
int cmd_sweep(const CommandOptions& opts, std::ostream& log);

/// Full command line entry point (subcommand parsing included).
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace sblem::app
