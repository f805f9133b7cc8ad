#include "sblem/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

#include "sblem/error.hpp"
#include "sblem/likelihood.hpp"

namespace sblem {

namespace {

const char* status_name(CheckStatus s) {
  switch (s) {
    case CheckStatus::kPass:
      return "pass";
    case CheckStatus::kFail:
      return "fail";
    case CheckStatus::kSkipped:
      return "skipped";
  }
  return "unknown";
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

bool DiagnosticsReport::verdict() const {
  for (const auto& c : checks) {
    if (!c.passed()) return false;
  }
  return true;
}

std::string DiagnosticsReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json j;
    j["name"] = c.name;
    j["pass"] = c.passed();
    j["status"] = status_name(c.status);
    j["value"] = number_or_null(c.value);
    j["threshold"] = number_or_null(c.threshold);
    j["witness"] = c.witness ? nlohmann::json(*c.witness) : nlohmann::json(nullptr);
    if (!c.note.empty()) j["note"] = c.note;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<double> objective_sequence(const EMTrace& trace, bool with_prior) {
  std::vector<double> values;
  values.reserve(trace.records.size() + 1);
  for (const auto& r : trace.records) values.push_back(with_prior ? r.L + r.log_prior : r.L);
  values.push_back(with_prior ? trace.L_final + trace.log_prior_final : trace.L_final);
  return values;
}

CheckRecord check_monotone(std::span<const double> values, double tol, std::string name) {
  CheckRecord rec;
  rec.name = std::move(name);
  rec.threshold = tol;
  rec.value = 0.0;
  if (values.size() < 2) {
    rec.note = "fewer than two values";
    return rec;
  }
  for (std::size_t r = 0; r + 1 < values.size(); ++r) {
    const double drop = (values[r] - values[r + 1]) / (1.0 + std::abs(values[r]));
    if (drop > rec.value) {
      rec.value = drop;
      if (drop > tol) rec.witness = static_cast<long>(r + 1);
    }
  }
  rec.status = rec.value > tol ? CheckStatus::kFail : CheckStatus::kPass;
  return rec;
}

CheckRecord check_monotone(const EMTrace& trace, double tol) {
  const auto values = objective_sequence(trace, true);
  return check_monotone(values, tol, "monotone");
}

double projected_grad_inf_norm(const Vector& grad, const Vector& gamma,
                               double gamma_floor, Eigen::Index* argmax) {
  double worst = 0.0;
  Eigen::Index where = -1;
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (gamma[i] <= gamma_floor && grad[i] < 0.0) continue;
    if (std::abs(grad[i]) > worst || where < 0) {
      worst = std::max(worst, std::abs(grad[i]));
      where = i;
    }
  }
  if (argmax != nullptr) *argmax = where;
  return worst;
}

CheckRecord check_stationary(const SystemModel& model, const Matrix& Y,
                             const Theta& theta, double tol, double gamma_floor) {
  const StackedCovariance cov = build_ry(model, theta);
  const double L = log_likelihood(cov, Y);
  const Vector grad = grad_gamma(cov, Y, model.n);
  CheckRecord rec;
  rec.name = "stationary";
  Eigen::Index where = -1;
  rec.value = projected_grad_inf_norm(grad, theta.gamma, gamma_floor, &where);
  rec.threshold = tol * (1.0 + std::abs(L));
  if (where >= 0) rec.witness = static_cast<long>(where);
  rec.status = rec.value <= rec.threshold ? CheckStatus::kPass : CheckStatus::kFail;
  return rec;
}

CheckRecord check_q_ascent(const EMTrace& trace) {
  CheckRecord rec;
  rec.name = "q_ascent";
  rec.threshold = 1e-10;
  for (std::size_t r = 0; r < trace.records.size(); ++r) {
    const auto& t = trace.records[r];
    if (std::isnan(t.q_next) || std::isnan(t.q_self)) {
      throw InvalidArgument("trace carries no Q values (record_Q was off)");
    }
    const double deficit = (t.q_self - t.q_next) / (1.0 + std::abs(t.q_self));
    if (deficit > rec.value) {
      rec.value = deficit;
      if (deficit > rec.threshold) rec.witness = static_cast<long>(t.iter);
    }
  }
  rec.status = rec.value > rec.threshold ? CheckStatus::kFail : CheckStatus::kPass;
  return rec;
}

CheckRecord check_gibbs_surrogate(const SystemModel& model, const Matrix& Y,
                                  std::span<const std::pair<Theta, Theta>> pairs) {
  CheckRecord rec;
  rec.name = "gibbs_surrogate";
  rec.threshold = 1e-9;

  // Pairs often share a reference; reuse its posterior.
  const Theta* cached_ref = nullptr;
  SufficientStats stats;
  Matrix scores;
  double L_ref = 0.0;
  double q_ref = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& [theta, ref] = pairs[p];
    if (theta.z != ref.z) {
      throw InvalidArgument("gibbs surrogate pairs must share z");
    }
    if (cached_ref == nullptr || !(*cached_ref == ref)) {
      const Posterior post = smooth(model, Y, ref);
      stats = estep_stats(model, post);
      scores = emission_scores(model, Y, post, stats);
      L_ref = log_likelihood(model, Y, ref);
      q_ref = q_value(model, scores, stats, ref);
      cached_ref = &ref;
    }
    const double L = log_likelihood(model, Y, theta);
    const double q = q_value(model, scores, stats, theta);
    const double slack = (q - q_ref) - (L - L_ref);  // must be <= tolerance
    const double rel = slack / (1.0 + std::abs(L));
    if (rel > rec.value) {
      rec.value = rel;
      if (rel > rec.threshold) rec.witness = static_cast<long>(p);
    }
  }
  rec.status = rec.value > rec.threshold ? CheckStatus::kFail : CheckStatus::kPass;
  return rec;
}

CheckRecord check_coercive(const SystemModel& model, const Matrix& Y,
                           const Indicator& z, const Vector& gamma,
                           std::span<const double> t_grid, int tail_points) {
  CheckRecord rec;
  rec.name = "coercive";
  if (t_grid.size() < 2) throw InvalidArgument("coercivity grid needs at least two points");
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1]) || !(t_grid[0] > 0.0)) {
      throw InvalidArgument("coercivity grid must be positive and increasing");
    }
  }
  const Matrix B = build_loading(model, z);
  const Vector stacked_gamma = gamma.replicate(model.K, 1);
  if ((B * stacked_gamma.asDiagonal()).squaredNorm() == 0.0) {
    rec.status = CheckStatus::kSkipped;
    rec.note = "B diag(gamma) = 0: L does not depend on the scale of gamma";
    return rec;
  }

  std::vector<double> L(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    L[i] = log_likelihood(model, Y, Theta{t_grid[i] * gamma, z});
  }
  const std::size_t tail = std::min<std::size_t>(std::max(tail_points, 2), t_grid.size());
  bool decreasing = true;
  for (std::size_t i = t_grid.size() - tail + 1; i < t_grid.size(); ++i) {
    if (!(L[i] < L[i - 1])) {
      decreasing = false;
      rec.witness = static_cast<long>(i);
      break;
    }
  }
  // Asymptotically L falls by rank/2 per unit of log t, rank >= 1. At finite
  // t a rank-one direction falls slightly slower than that, so require half
  // the asymptotic rate.
  const std::size_t first = t_grid.size() - tail;
  rec.value = L[first] - L.back();
  rec.threshold = 0.25 * std::log(t_grid.back() / t_grid[first]);
  const bool bound_ok = [&] {
    const double bound = likelihood_upper_bound(model);
    for (double v : L) {
      if (v > bound) return false;
    }
    return true;
  }();
  if (!bound_ok) rec.note = "likelihood exceeded its upper bound";
  rec.status = decreasing && bound_ok && rec.value >= rec.threshold ? CheckStatus::kPass
                                                                    : CheckStatus::kFail;
  return rec;
}

std::vector<Vector> dyadic_sequence(const Vector& gamma_lim, int count) {
  std::vector<Vector> seq;
  seq.reserve(count);
  for (int j = 1; j <= count; ++j) {
    seq.push_back((gamma_lim.array() + std::ldexp(1.0, -j)).matrix());
  }
  return seq;
}

CheckRecord check_map_closed(const SystemModel& model, const Matrix& Y,
                             std::span<const Vector> gamma_seq, const Vector& gamma_lim,
                             const Indicator& z_fixed, double gamma_tol,
                             double gamma_floor) {
  CheckRecord rec;
  rec.name = "map_closed";
  rec.threshold = gamma_tol;
  if (gamma_seq.empty()) {
    rec.note = "empty sequence";
    return rec;
  }
  const Theta at_limit = em_iterate(model, Y, Theta{gamma_lim, z_fixed}, gamma_floor);
  const std::size_t tail_start = gamma_seq.size() / 2;
  bool z_stable = true;
  double last_gap = 0.0;
  for (std::size_t j = 0; j < gamma_seq.size(); ++j) {
    const Theta out = em_iterate(model, Y, Theta{gamma_seq[j], z_fixed}, gamma_floor);
    last_gap = (out.gamma - at_limit.gamma).lpNorm<Eigen::Infinity>();
    if (j >= tail_start && out.z != at_limit.z && z_stable) {
      z_stable = false;
      rec.witness = static_cast<long>(j);
      rec.note = "z output differs from the limit's (Viterbi tie region?)";
    }
  }
  rec.value = last_gap;
  rec.status = z_stable && last_gap <= gamma_tol ? CheckStatus::kPass : CheckStatus::kFail;
  return rec;
}

DiagnosticsReport run_diagnostics(const SystemModel& model, const Matrix& Y,
                                  const EMTrace& trace, const DiagnosticsOptions& opts) {
  DiagnosticsReport report;
  const Theta& final = trace.theta_final;

  report.checks.push_back(check_monotone(trace, opts.monotone_tol));

  {
    const auto plain = objective_sequence(trace, false);
    CheckRecord bound;
    bound.name = "upper_bound";
    bound.threshold = likelihood_upper_bound(model);
    bound.value = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < plain.size(); ++r) {
      if (plain[r] > bound.value) bound.value = plain[r];
      if (plain[r] > bound.threshold && !bound.witness) bound.witness = static_cast<long>(r);
    }
    bound.status = bound.value <= bound.threshold ? CheckStatus::kPass : CheckStatus::kFail;
    report.checks.push_back(std::move(bound));
  }

  {
    // Final oscillation of the monitored objective; reported, never failed.
    const auto values = objective_sequence(trace, true);
    const std::size_t window = std::min<std::size_t>(values.size(), 10);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = values.size() - window; i < values.size(); ++i) {
      lo = std::min(lo, values[i]);
      hi = std::max(hi, values[i]);
    }
    CheckRecord osc;
    osc.name = "objective_oscillation";
    osc.value = hi - lo;
    osc.threshold = std::numeric_limits<double>::infinity();
    osc.note = "range over the last " + std::to_string(window) + " values";
    report.checks.push_back(std::move(osc));
  }

  report.checks.push_back(
      check_stationary(model, Y, final, opts.stationary_tol, opts.gamma_floor));

  const bool have_q = !trace.records.empty() && !std::isnan(trace.records.front().q_next);
  if (have_q) {
    report.checks.push_back(check_q_ascent(trace));
  } else {
    CheckRecord rec;
    rec.name = "q_ascent";
    rec.status = CheckStatus::kSkipped;
    rec.note = "trace recorded without Q values";
    report.checks.push_back(std::move(rec));
  }

  {
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 0.5);
    std::vector<std::pair<Theta, Theta>> pairs;
    pairs.emplace_back(final, final);
    Theta stepped = em_iterate(model, Y, final, opts.gamma_floor);
    stepped.z = final.z;
    pairs.emplace_back(stepped, final);
    for (int s = 0; s < opts.gibbs_samples; ++s) {
      Theta perturbed = final;
      for (Eigen::Index i = 0; i < perturbed.gamma.size(); ++i) {
        perturbed.gamma[i] = std::max(opts.gamma_floor, final.gamma[i]) * std::exp(normal(rng));
      }
      pairs.emplace_back(std::move(perturbed), final);
    }
    report.checks.push_back(check_gibbs_surrogate(model, Y, pairs));
  }

  report.checks.push_back(check_coercive(model, Y, final.z, final.gamma, opts.t_grid));

  {
    const auto seq = dyadic_sequence(final.gamma, opts.closed_sequence_length);
    report.checks.push_back(
        check_map_closed(model, Y, seq, final.gamma, final.z, 1e-6, opts.gamma_floor));
  }
  return report;
}

}  // namespace sblem
