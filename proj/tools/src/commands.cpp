#include "sblem_app/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "sblem/config.hpp"
#include "sblem/csv.hpp"
#include "sblem/dataset_io.hpp"
#include "sblem/diagnostics.hpp"
#include "sblem/error.hpp"
#include "sblem/kalman.hpp"
#include "sblem/likelihood.hpp"
#include "sblem/oracle.hpp"
#include "sblem/trace_io.hpp"

#ifndef SBLEM_VERSION
#define SBLEM_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace sblem::app {
namespace {

constexpr double kSupportThreshold = 1e-6;
constexpr double kOracleGapTol = 1e-9;

template <class F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const InvalidArgument& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    log << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    log << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const json::exception& e) {
    log << "io error: malformed json: " << e.what() << "\n";
    return kIoError;
  } catch (const NumericalError& e) {
    log << "numerical error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const SizeCapExceeded& e) {
    log << "size cap: " << e.what() << "\n";
    return kSizeCap;
  }
}

RunConfig load_config(const CommandOptions& opts) {
  if (!opts.config) throw InvalidArgument("--config is required");
  return load_run_config(*opts.config, opts.seed);
}

fs::path output_dir(const CommandOptions& opts, const RunConfig& cfg) {
  if (opts.out) return *opts.out;
  if (!cfg.output.empty()) return cfg.output;
  throw InvalidArgument("no output directory: pass --out or set output in the config");
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

struct Prepared {
  SystemModel model;
  SimConfig sim;
  Dataset data;
};

Prepared prepare_data(const RunConfig& cfg) {
  if (cfg.dataset) {
    if (!has_dataset(*cfg.dataset)) throw IoError("no dataset in " + *cfg.dataset);
    StoredDataset stored = read_dataset(*cfg.dataset);
    return {std::move(stored.model), std::move(stored.sim), std::move(stored.data)};
  }
  if (!cfg.sim || !cfg.model) {
    throw InvalidArgument("no dataset: give [dataset] path, or [model] and [sim] blocks");
  }
  Prepared p;
  p.model = resolve_model(*cfg.model);
  p.sim = resolve_sim(cfg);
  p.data = simulate_dataset(p.model, p.sim);
  return p;
}

std::string versions_json() {
  json j;
  j["sblem"] = SBLEM_VERSION;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
               "." + std::to_string(EIGEN_MINOR_VERSION);
  j["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  j["cli11"] = CLI11_VERSION;
#if defined(__clang__)
  j["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  j["compiler"] = std::string("gcc ") + __VERSION__;
#else
  j["compiler"] = "unknown";
#endif
  j["cplusplus"] = __cplusplus;
  return j.dump(2) + "\n";
}

json metrics_json(const RunMetrics& m) {
  json j;
  j["nmse"] = m.nmse;
  j["z_accuracy"] = m.z_accuracy;
  j["support_precision"] = m.support_precision;
  j["support_recall"] = m.support_recall;
  j["support_exact"] = m.support_exact;
  j["support_estimated"] = m.support_estimated;
  j["support_true"] = m.support_true;
  j["support_threshold_rel"] = kSupportThreshold;
  return j;
}

struct RunOutcome {
  EMTrace trace;
  RunMetrics metrics;
};

// Writes a self-describing run directory and returns what was computed.
RunOutcome execute_run(const RunConfig& cfg, const Prepared& p, const fs::path& out,
                       bool debug_dumps) {
  make_dir(out);
  write_text_file(out / "config.toml", cfg.source_text);
  write_text_file(out / "versions.json", versions_json());
  write_dataset(out, p.model, p.sim, p.data);

  const Theta theta0 = resolve_initial_theta(cfg.init, p.model);
  validate_options(cfg.em);
  RunOutcome outcome;
  try {
    if (debug_dumps && p.model.K * p.model.m <= kDenseEnvelope) {
      write_matrix_csv(out / "ry.csv", build_ry(p.model, theta0).ry);
    }
    outcome.trace = run_em(p.model, p.data.Y, theta0, cfg.em);
    outcome.metrics = compute_metrics(p.model, p.data, outcome.trace.theta_final);
  } catch (const NumericalError& e) {
    json payload;
    payload["error"] = "numerical";
    payload["message"] = e.what();
    payload["gamma0"] = std::vector<double>(theta0.gamma.data(),
                                            theta0.gamma.data() + theta0.gamma.size());
    payload["z0"] = theta0.z;
    write_text_file(out / "error.json", payload.dump(2) + "\n");
    throw;
  }
  write_trace_csv(out / "trace.csv", outcome.trace);
  write_theta_final_json(out / "theta_final.json", outcome.trace);
  write_text_file(out / "metrics.json", metrics_json(outcome.metrics).dump(2) + "\n");
  return outcome;
}

DiagnosticsReport filtered_diagnostics(const SystemModel& model, const Matrix& Y,
                                       const EMTrace& trace, const RunConfig& cfg) {
  DiagnosticsReport report = run_diagnostics(model, Y, trace, cfg.diagnostics);
  if (!cfg.checks.empty()) {
    std::erase_if(report.checks, [&](const CheckRecord& c) {
      return std::find(cfg.checks.begin(), cfg.checks.end(), c.name) == cfg.checks.end();
    });
  }
  return report;
}

std::string status_word(CheckStatus s) {
  switch (s) {
    case CheckStatus::kPass: return "pass";
    case CheckStatus::kFail: return "FAIL";
    case CheckStatus::kSkipped: return "skipped";
  }
  return "?";
}

std::string bitstring(const Indicator& z) {
  std::string s;
  for (int v : z) s.push_back(v ? '1' : '0');
  return s;
}

}  // namespace

RunMetrics compute_metrics(const SystemModel& model, const Dataset& data, const Theta& theta) {
  RunMetrics m;
  const Posterior post = smooth(model, data.Y, theta);
  Matrix Xhat(model.n, model.K);
  for (int k = 0; k < model.K; ++k) Xhat.col(k) = post.mean[k];
  const double err = (Xhat - data.X).squaredNorm();
  const double ref = data.X.squaredNorm();
  m.nmse = ref > 0.0 ? err / ref : (err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());

  int hits = 0;
  for (int k = 0; k < model.K; ++k) hits += theta.z[k] == data.zstar[k];
  m.z_accuracy = model.K > 0 ? static_cast<double>(hits) / model.K : 1.0;

  const double gmax = theta.gamma.size() > 0 ? theta.gamma.maxCoeff() : 0.0;
  for (int i = 0; i < model.n; ++i) {
    if (gmax > 0.0 && theta.gamma[i] > kSupportThreshold * gmax) m.support_estimated.push_back(i);
  }
  m.support_true = support_of(data.U);
  std::vector<int> common;
  std::set_intersection(m.support_estimated.begin(), m.support_estimated.end(),
                        m.support_true.begin(), m.support_true.end(), std::back_inserter(common));
  m.support_precision = m.support_estimated.empty()
                            ? 1.0
                            : static_cast<double>(common.size()) / m.support_estimated.size();
  m.support_recall = m.support_true.empty()
                         ? 1.0
                         : static_cast<double>(common.size()) / m.support_true.size();
  m.support_exact = m.support_estimated == m.support_true;
  return m;
}

int cmd_simulate(const CommandOptions& opts, std::ostream& log) {
  return guarded(log, [&] {
    const RunConfig cfg = load_config(opts);
    if (!cfg.model) throw InvalidArgument("configuration has no [model] block");
    const SystemModel model = resolve_model(*cfg.model);
    const SimConfig sim = resolve_sim(cfg);
    const Dataset data = simulate_dataset(model, sim);
    const fs::path out = output_dir(opts, cfg);
    make_dir(out);
    write_dataset(out, model, sim, data);
    log << "simulate: wrote dataset (n=" << model.n << ", m=" << model.m << ", K=" << model.K
        << ") to " << out.string() << "\n";
    return int{kOk};
  });
}

int cmd_run(const CommandOptions& opts, std::ostream& log) {
  return guarded(log, [&] {
    const RunConfig cfg = load_config(opts);
    const fs::path out = output_dir(opts, cfg);
    const Prepared p = prepare_data(cfg);
    const RunOutcome r = execute_run(cfg, p, out, opts.debug_dumps);
    log << "run: " << to_string(r.trace.termination) << " after " << r.trace.records.size()
        << " iterations, L = " << format_double(r.trace.L_final)
        << ", nmse = " << format_double(r.metrics.nmse)
        << ", z accuracy = " << format_double(r.metrics.z_accuracy) << "\n";
    if (r.trace.termination == Termination::kNonMonotone) {
      log << "warning: " << r.trace.message << "\n";
    }
    return int{kOk};
  });
}

int cmd_diagnose(const fs::path& run_dir, const CommandOptions& opts, std::ostream& log) {
  return guarded(log, [&] {
    if (!fs::is_directory(run_dir)) throw IoError("no run directory " + run_dir.string());
    RunConfig cfg;
    if (fs::exists(run_dir / "config.toml")) cfg = load_run_config(run_dir / "config.toml", opts.seed);
    const StoredDataset stored = read_dataset(run_dir);
    const EMTrace trace = read_run_trace(run_dir);
    const DiagnosticsReport report = filtered_diagnostics(stored.model, stored.data.Y, trace, cfg);
    write_text_file(run_dir / "diagnostics.json", report.to_json());
    for (const auto& c : report.checks) {
      log << "  " << c.name << ": " << status_word(c.status) << " (value "
          << format_double(c.value) << ", threshold " << format_double(c.threshold) << ")";
      if (c.witness) log << " witness " << *c.witness;
      if (!c.note.empty()) log << " -- " << c.note;
      log << "\n";
    }
    log << "diagnose: " << (report.verdict() ? "pass" : "fail") << "\n";
    return int{report.verdict() ? kOk : kDiagnosticsFailed};
  });
}

int cmd_oracle(const fs::path& run_dir, const CommandOptions& opts, std::ostream& log) {
  return guarded(log, [&] {
    if (!fs::is_directory(run_dir)) throw IoError("no run directory " + run_dir.string());
    const StoredDataset stored = read_dataset(run_dir);
    const SystemModel& model = stored.model;
    const Matrix& Y = stored.data.Y;
    if (model.K > kExhaustiveMlMaxK || model.n > kExhaustiveMlMaxN) {
      throw SizeCapExceeded("oracle needs K <= " + std::to_string(kExhaustiveMlMaxK) +
                            " and n <= " + std::to_string(kExhaustiveMlMaxN) + " (got K=" +
                            std::to_string(model.K) + ", n=" + std::to_string(model.n) + ")");
    }
    const EMTrace trace = read_run_trace(run_dir);
    const Theta& theta = trace.theta_final;
    validate_theta(model, theta);

    const Posterior post = smooth(model, Y, theta);
    const Matrix scores = emission_scores(model, Y, post);
    const OracleResult bf = brute_force_z(scores, model);
    const Indicator vz = viterbi(scores, model);
    const bool viterbi_ok =
        std::find(bf.argmax_set.begin(), bf.argmax_set.end(), vz) != bf.argmax_set.end();

    const ExhaustiveMlResult ml = exhaustive_ml(model, Y, {}, theta);
    const double gap = ml.L_best - trace.L_final;
    double best_penalized = -std::numeric_limits<double>::infinity();
    Indicator z_penalized;
    for (const auto& e : ml.table) {
      const double J = e.L + log_prior_z(model, e.z);
      if (J > best_penalized) {
        best_penalized = J;
        z_penalized = e.z;
      }
    }

    json j;
    j["viterbi_z"] = bitstring(vz);
    j["brute_force_best_z"] = bitstring(bf.best_z);
    j["brute_force_best_value"] = bf.best_value;
    j["viterbi_value"] = z_objective(scores, model, vz);
    j["viterbi_in_argmax"] = viterbi_ok;
    j["argmax_size"] = bf.argmax_set.size();
    j["em_z"] = bitstring(theta.z);
    j["em_L"] = trace.L_final;
    j["ml_z"] = bitstring(ml.z_best);
    j["ml_gamma"] = std::vector<double>(ml.gamma_best.data(),
                                        ml.gamma_best.data() + ml.gamma_best.size());
    j["ml_L"] = ml.L_best;
    j["L_gap"] = gap;
    j["em_z_matches_ml"] = ml.z_best == theta.z;
    j["penalized_ml_z"] = bitstring(z_penalized);
    j["penalized_ml_value"] = best_penalized;
    j["em_z_matches_penalized_ml"] = z_penalized == theta.z;
    write_text_file(run_dir / "oracle.json", j.dump(2) + "\n");

    if (opts.debug_dumps && bf.table) {
      std::ostringstream csv;
      csv << "z,objective,L\n";
      for (std::size_t mask = 0; mask < bf.table->size(); ++mask) {
        csv << bitstring(indicator_from_mask(mask, model.K)) << ','
            << format_double((*bf.table)[mask]) << ',' << format_double(ml.table[mask].L) << '\n';
      }
      write_text_file(run_dir / "oracle_table.csv", csv.str());
    }

    log << "oracle: viterbi " << (viterbi_ok ? "in" : "NOT in") << " argmax set; ML L "
        << format_double(ml.L_best) << ", EM L " << format_double(trace.L_final) << ", gap "
        << format_double(gap) << "; EM z " << (ml.z_best == theta.z ? "matches" : "differs from")
        << " ML z\n";
    return int{viterbi_ok && gap >= -kOracleGapTol ? kOk : kDiagnosticsFailed};
  });
}

int cmd_sweep(const CommandOptions& opts, std::ostream& log) {
  return guarded(log, [&] {
    const RunConfig cfg = load_config(opts);
    if (!cfg.model || !cfg.sim) throw InvalidArgument("sweep needs [model] and [sim] blocks");
    const fs::path out = output_dir(opts, cfg);
    const SystemModel model = resolve_model(*cfg.model);
    const SimConfig base = resolve_sim(cfg);

    struct Cell {
      std::uint64_t seed;
      std::optional<double> snr_db;
      int sparsity;
    };
    const std::vector<std::uint64_t> seeds =
        cfg.sweep.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : cfg.sweep.seeds;
    std::vector<std::optional<double>> snrs;
    for (double s : cfg.sweep.snr_db) snrs.emplace_back(s);
    if (snrs.empty()) snrs.emplace_back(std::nullopt);
    const std::vector<int> sparsities =
        cfg.sweep.sparsity.empty() ? std::vector<int>{base.sparsity} : cfg.sweep.sparsity;
    std::vector<Cell> cells;
    for (auto snr : snrs) {
      for (int s : sparsities) {
        for (auto seed : seeds) cells.push_back({seed, snr, s});
      }
    }
    make_dir(out);

    struct Row {
      SimConfig sim;
      RunOutcome run;
      bool verdict = false;
      std::exception_ptr error;
    };
    std::vector<Row> rows(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        Row& row = rows[i];
        try {
          SimConfig sim = base;
          sim.seed = cells[i].seed;
          sim.sparsity = cells[i].sparsity;
          sim.support.reset();
          if (cells[i].snr_db) sim.input_variance = model.sigma2 * std::pow(10.0, *cells[i].snr_db / 10.0);
          row.sim = sim;
          Prepared p{model, sim, simulate_dataset(model, sim)};
          char name[32];
          std::snprintf(name, sizeof name, "cell_%04zu", i);
          row.run = execute_run(cfg, p, out / name, opts.debug_dumps);
          const DiagnosticsReport report = filtered_diagnostics(model, p.data.Y, row.run.trace, cfg);
          write_text_file(out / name / "diagnostics.json", report.to_json());
          row.verdict = report.verdict();
        } catch (...) {
          row.error = std::current_exception();
        }
      }
    };
    unsigned jobs = opts.jobs > 0 ? opts.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(cells.size(), 1)));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    // A malformed cell (e.g. sparsity > n) is a configuration error for the
    // whole sweep; numerical failures are recorded per row.
    for (const Row& row : rows) {
      if (!row.error) continue;
      try {
        std::rethrow_exception(row.error);
      } catch (const NumericalError&) {
      }
    }

    std::ostringstream csv;
    csv << "cell,seed,snr_db,sparsity,input_variance,L_final,iterations,termination,nmse,"
           "z_accuracy,support_exact,diagnostics\n";
    int failed = 0;
    int numerical = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const Row& row = rows[i];
      csv << i << ',' << cells[i].seed << ','
          << (cells[i].snr_db ? format_double(*cells[i].snr_db) : std::string("")) << ','
          << cells[i].sparsity << ',' << format_double(row.sim.input_variance) << ',';
      if (row.error) {
        ++numerical;
        csv << "nan,0,numerical_error,nan,nan,0,fail\n";
        continue;
      }
      failed += !row.verdict;
      csv << format_double(row.run.trace.L_final) << ',' << row.run.trace.records.size() << ','
          << to_string(row.run.trace.termination) << ',' << format_double(row.run.metrics.nmse)
          << ',' << format_double(row.run.metrics.z_accuracy) << ','
          << (row.run.metrics.support_exact ? 1 : 0) << ',' << (row.verdict ? "pass" : "fail")
          << '\n';
    }
    write_text_file(out / "summary.csv", csv.str());
    log << "sweep: " << cells.size() << " cells, " << failed << " diagnostics failures, "
        << numerical << " numerical errors; summary in " << (out / "summary.csv").string() << "\n";
    return int{numerical > 0 ? kNumericalError : kOk};
  });
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse-input state estimation with missing observations (EM/SBL)", "sblem"};
  app.require_subcommand(1);
  CommandOptions opts;
  std::string run_dir;

  auto add_common = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("--config", opts.config, "Run configuration (TOML)")->required();
    sub->add_option("--out", opts.out, "Output directory (overrides the config)");
    sub->add_option("--seed", opts.seed, "Global seed (overrides the config)");
    sub->add_option("--jobs", opts.jobs, "Worker threads for sweeps (0: all cores)");
    sub->add_flag("--debug-dumps", opts.debug_dumps, "Write R_Y and oracle tables as CSV");
  };
  auto* simulate = app.add_subcommand("simulate", "Simulate a dataset");
  add_common(simulate, true);
  auto* run = app.add_subcommand("run", "Run EM on a dataset");
  add_common(run, true);
  auto* diagnose = app.add_subcommand("diagnose", "Check a finished run");
  diagnose->add_option("run_dir", run_dir, "Run directory")->required();
  add_common(diagnose, false);
  auto* oracle = app.add_subcommand("oracle", "Compare a run with exhaustive search");
  oracle->add_option("run_dir", run_dir, "Run directory")->required();
  add_common(oracle, false);
  auto* sweep = app.add_subcommand("sweep", "Run a grid of seeds, SNRs and sparsities");
  add_common(sweep, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  if (simulate->parsed()) return cmd_simulate(opts, err);
  if (run->parsed()) return cmd_run(opts, err);
  if (diagnose->parsed()) return cmd_diagnose(run_dir, opts, err);
  if (oracle->parsed()) return cmd_oracle(run_dir, opts, err);
  return cmd_sweep(opts, err);
}

}  // namespace sblem::app
