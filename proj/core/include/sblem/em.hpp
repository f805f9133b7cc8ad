#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sblem/kalman.hpp"
#include "sblem/model.hpp"

namespace sblem {

/// Per-time posterior moments used by the M-step.
///   second_moment[k] = E[x_k x_k^T]
///   cross_moment[k]  = E[x_k x_{k-1}^T]   (zero at k = 0)
///   input_power(i,k) = E[u_{k,i}^2],  u_k = x_k - D x_{k-1}
struct SufficientStats {
  std::vector<Matrix> second_moment;
  std::vector<Matrix> cross_moment;
  Matrix input_power;  // n x K
};

SufficientStats estep_stats(const SystemModel& model, const Posterior& post);

/// gamma_i = max(floor, mean_k E[u_{k,i}^2]).
Vector mstep_gamma(const SufficientStats& stats, double gamma_floor);

/// Sum over k and i of E[log N(u_{k,i}; 0, gamma_i)]. Returns -inf when some
/// gamma_i <= 0.
double gamma_term(const SufficientStats& stats, const Vector& gamma);

/// K x 2 table: column 0 = E[log p(y_k | x_k, z_k = 0)], column 1 = same with
/// z_k = 1.
Matrix emission_scores(const SystemModel& model, const Matrix& Y,
                       const Posterior& post, const SufficientStats& stats);
Matrix emission_scores(const SystemModel& model, const Matrix& Y,
                       const Posterior& post);

/// log P(z) under the two-state Markov chain (may be -inf).
double log_prior_z(const SystemModel& model, const Indicator& z);

/// sum_k scores(k, z_k) + log P(z), accumulated in time order.
double z_objective(const Matrix& scores, const SystemModel& model,
                   const Indicator& z);

/// argmax_z z_objective(scores, model, z) by dynamic programming. Ties go to
/// z_k = 1.
Indicator viterbi(const Matrix& scores, const SystemModel& model);

/// Q(theta; theta_ref) = E[log p(Y | X, z)] + log P(z) + E[log p(X; gamma)],
/// expectations under the posterior at theta_ref.
double q_function(const SystemModel& model, const Matrix& Y,
                  const Theta& theta, const Theta& theta_ref);

/// Q evaluated from precomputed posterior quantities of theta_ref.
double q_value(const SystemModel& model, const Matrix& scores,
               const SufficientStats& stats, const Theta& theta);

inline constexpr double kDefaultGammaFloor = 1e-12;

struct EmStep {
  Theta next;
  Posterior posterior;  // under the input theta
  SufficientStats stats;
  Matrix scores;
};

/// One application of the EM map. Both halves of the M-step use the same
/// posterior computed under `theta`.
EmStep em_step(const SystemModel& model, const Matrix& Y, const Theta& theta,
               double gamma_floor = kDefaultGammaFloor);

Theta em_iterate(const SystemModel& model, const Matrix& Y, const Theta& theta,
                 double gamma_floor = kDefaultGammaFloor);

/// Gradient of L with respect to gamma from posterior moments:
/// dL/dgamma_i = sum_k (E[u_{k,i}^2] - gamma_i) / (2 gamma_i^2).
Vector fisher_gradient(const SufficientStats& stats, const Vector& gamma);

struct EMOptions {
  int max_iters = 1000;
  double tol_rel_L = 1e-10;
  double tol_gamma = 1e-8;
  double gamma_floor = kDefaultGammaFloor;
  bool record_Q = true;
};

void validate_options(const EMOptions& opts);

enum class Termination { kConverged, kMaxIterations, kNonMonotone };

std::string_view to_string(Termination t);
Termination termination_from_string(std::string_view s);

/// Record r describes the step theta^(r) -> theta^(r+1).
struct TraceRecord {
  int iter = 0;
  Theta theta;
  double L = 0.0;
  double log_prior = 0.0;  // log P(z^(r))
  double q_next = 0.0;     // Q(theta^(r+1); theta^(r)), NaN if not recorded
  double q_self = 0.0;     // Q(theta^(r); theta^(r)),   NaN if not recorded
  double grad_inf_norm = 0.0;
  double gamma_change = 0.0;
  int z_hamming_change = 0;
  double wall_ms = 0.0;
};

struct EMTrace {
  std::vector<TraceRecord> records;
  Theta theta_final;
  double L_final = 0.0;
  double log_prior_final = 0.0;
  Termination termination = Termination::kMaxIterations;
  std::string message;
};

/// max_i |gamma'_i - gamma_i| / max(gamma_i, floor).
double relative_gamma_change(const Vector& before, const Vector& after,
                             double gamma_floor);

/// Iterates the EM map. The monitored objective is L(theta) + log P(z), the
/// quantity the map ascends; a drop beyond 1e-10 (1 + |.|) stops the run with
/// Termination::kNonMonotone.
EMTrace run_em(const SystemModel& model, const Matrix& Y, const Theta& theta0,
               const EMOptions& opts);

}  // namespace sblem
