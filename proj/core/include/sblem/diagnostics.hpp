#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sblem/em.hpp"

namespace sblem {

enum class CheckStatus { kPass, kFail, kSkipped };

/// Outcome of one executable convergence check. `value` is the measured
/// quantity and `threshold` the bound it is compared with; `witness` points at
/// the offending iteration, coordinate or sequence index when there is one.
struct CheckRecord {
  std::string name;
  CheckStatus status = CheckStatus::kPass;
  double value = 0.0;
  double threshold = 0.0;
  std::optional<long> witness;
  std::string note;

  bool passed() const { return status != CheckStatus::kFail; }
};

struct DiagnosticsReport {
  std::vector<CheckRecord> checks;
  bool verdict() const;
  std::string to_json() const;
};

/// Objective sequence monitored for ascent: L(theta^(r)) (+ log P(z^(r)) when
/// `with_prior`), followed by the final value.
std::vector<double> objective_sequence(const EMTrace& trace, bool with_prior);

/// Passes iff v[r+1] >= v[r] - tol (1 + |v[r]|) for all r. Witness is the
/// index of the lower value of the worst dip.
CheckRecord check_monotone(std::span<const double> values, double tol,
                           std::string name = "monotone");
CheckRecord check_monotone(const EMTrace& trace, double tol);

/// Projected infinity norm of grad_gamma L: coordinates with
/// gamma_i <= gamma_floor and a negative partial derivative are ignored.
double projected_grad_inf_norm(const Vector& grad, const Vector& gamma,
                               double gamma_floor, Eigen::Index* argmax = nullptr);

/// Passes iff the projected norm is <= tol (1 + |L(theta)|).
CheckRecord check_stationary(const SystemModel& model, const Matrix& Y,
                             const Theta& theta, double tol,
                             double gamma_floor = kDefaultGammaFloor);

/// Q(theta^(r+1); theta^(r)) >= Q(theta^(r); theta^(r)) - 1e-10 (1 + |Q|).
/// Throws InvalidArgument when the trace carries no Q values.
CheckRecord check_q_ascent(const EMTrace& trace);

/// L(theta) - L(ref) >= Q(theta; ref) - Q(ref; ref) - 1e-9 (1 + |L|) for
/// every (theta, ref) pair; both members of a pair must share z.
CheckRecord check_gibbs_surrogate(const SystemModel& model, const Matrix& Y,
                                  std::span<const std::pair<Theta, Theta>> pairs);

/// L([t gamma; z]) must be strictly decreasing over the last `tail_points`
/// grid values and fall by at least log(t_max / t_first) / 4 across that tail.
/// Skipped when B diag(gamma) vanishes (L is then constant in t).
CheckRecord check_coercive(const SystemModel& model, const Matrix& Y,
                           const Indicator& z, const Vector& gamma,
                           std::span<const double> t_grid, int tail_points = 3);

/// em_iterate along gamma_seq (with z fixed) must approach em_iterate at
/// gamma_lim: gamma parts within `gamma_tol` at the end of the sequence and
/// z parts equal over its second half.
CheckRecord check_map_closed(const SystemModel& model, const Matrix& Y,
                             std::span<const Vector> gamma_seq, const Vector& gamma_lim,
                             const Indicator& z_fixed, double gamma_tol = 1e-6,
                             double gamma_floor = kDefaultGammaFloor);

/// gamma_lim + 2^-j * 1 for j = 1..count.
std::vector<Vector> dyadic_sequence(const Vector& gamma_lim, int count);

struct DiagnosticsOptions {
  double monotone_tol = 1e-10;
  double stationary_tol = 1e-4;
  double gamma_floor = kDefaultGammaFloor;
  int gibbs_samples = 200;
  std::vector<double> t_grid{1.0, 10.0, 100.0, 1000.0, 10000.0};
  int closed_sequence_length = 30;
  std::uint64_t seed = 0;
};

/// Runs every check on a finished run and collects the records.
DiagnosticsReport run_diagnostics(const SystemModel& model, const Matrix& Y,
                                  const EMTrace& trace, const DiagnosticsOptions& opts);

}  // namespace sblem
