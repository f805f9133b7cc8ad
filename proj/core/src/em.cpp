#include "sblem/em.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "sblem/error.hpp"
#include "sblem/likelihood.hpp"

namespace sblem {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

double log_transition(const SystemModel& model, int from, int to) {
  const double stay = from == 1 ? model.p1 : model.p0;
  return safe_log(from == to ? stay : 1.0 - stay);
}

double log_initial(const SystemModel& model, int state) {
  return safe_log(state == 1 ? model.pi1 : 1.0 - model.pi1);
}

}  // namespace

SufficientStats estep_stats(const SystemModel& model, const Posterior& post) {
  const int K = static_cast<int>(post.mean.size());
  const int n = model.n;
  SufficientStats stats;
  stats.second_moment.reserve(K);
  stats.cross_moment.reserve(K);
  stats.input_power.resize(n, K);

  const Matrix& D = model.D;
  for (int k = 0; k < K; ++k) {
    stats.second_moment.push_back(post.cov[k] +
                                  post.mean[k] * post.mean[k].transpose());
    if (k == 0) {
      stats.cross_moment.push_back(Matrix::Zero(n, n));
      stats.input_power.col(k) = stats.second_moment[k].diagonal();
    } else {
      stats.cross_moment.push_back(post.cross_cov[k] +
                                   post.mean[k] * post.mean[k - 1].transpose());
      const Matrix& S = stats.second_moment[k];
      const Matrix& C = stats.cross_moment[k];
      const Matrix DC = D * C.transpose();
      const Matrix Euu = S - DC.transpose() - DC +
                         D * stats.second_moment[k - 1] * D.transpose();
      stats.input_power.col(k) = Euu.diagonal();
    }
  }
  return stats;
}

Vector mstep_gamma(const SufficientStats& stats, double gamma_floor) {
  const Vector mean = stats.input_power.rowwise().mean();
  return mean.cwiseMax(gamma_floor);
}

double gamma_term(const SufficientStats& stats, const Vector& gamma) {
  const Eigen::Index n = stats.input_power.rows();
  const Eigen::Index K = stats.input_power.cols();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(gamma[i] > 0.0)) return kNegInf;
    const double power = stats.input_power.row(i).sum();
    total += -0.5 * static_cast<double>(K) * std::log(2.0 * std::numbers::pi * gamma[i]) -
             power / (2.0 * gamma[i]);
  }
  return total;
}

Matrix emission_scores(const SystemModel& model, const Matrix& Y,
                       const Posterior& post, const SufficientStats& stats) {
  const int K = model.K;
  const double base = -0.5 * model.m * std::log(2.0 * std::numbers::pi * model.sigma2);
  const Matrix AtA = model.A.transpose() * model.A;
  Matrix scores(K, 2);
  for (int k = 0; k < K; ++k) {
    const Vector y = Y.col(k);
    const double yy = y.squaredNorm();
    const double cross = y.dot(model.A * post.mean[k]);
    const double quad = (AtA.cwiseProduct(stats.second_moment[k])).sum();
    scores(k, 0) = base - yy / (2.0 * model.sigma2);
    scores(k, 1) = base - (yy - 2.0 * cross + quad) / (2.0 * model.sigma2);
  }
  return scores;
}

Matrix emission_scores(const SystemModel& model, const Matrix& Y,
                       const Posterior& post) {
  return emission_scores(model, Y, post, estep_stats(model, post));
}

double log_prior_z(const SystemModel& model, const Indicator& z) {
  if (z.empty()) return 0.0;
  double total = log_initial(model, z[0]);
  for (std::size_t k = 1; k < z.size(); ++k) total += log_transition(model, z[k - 1], z[k]);
  return total;
}

double z_objective(const Matrix& scores, const SystemModel& model,
                   const Indicator& z) {
  double total = log_initial(model, z[0]) + scores(0, z[0]);
  for (std::size_t k = 1; k < z.size(); ++k) {
    total += log_transition(model, z[k - 1], z[k]) +
             scores(static_cast<Eigen::Index>(k), z[k]);
  }
  return total;
}

Indicator viterbi(const Matrix& scores, const SystemModel& model) {
  const int K = static_cast<int>(scores.rows());
  if (K == 0 || scores.cols() != 2) {
    throw InvalidArgument("viterbi expects a K x 2 score table with K >= 1");
  }
  // best[k][s]: best score of a path ending in state s at time k.
  std::vector<std::array<double, 2>> best(K);
  std::vector<std::array<int, 2>> back(K);
  for (int s = 0; s < 2; ++s) best[0][s] = log_initial(model, s) + scores(0, s);
  for (int k = 1; k < K; ++k) {
    for (int s = 0; s < 2; ++s) {
      const double from0 = best[k - 1][0] + log_transition(model, 0, s);
      const double from1 = best[k - 1][1] + log_transition(model, 1, s);
      back[k][s] = from1 >= from0 ? 1 : 0;
      best[k][s] = std::max(from0, from1) + scores(k, s);
    }
  }
  Indicator z(K);
  z[K - 1] = best[K - 1][1] >= best[K - 1][0] ? 1 : 0;
  for (int k = K - 1; k > 0; --k) z[k - 1] = back[k][z[k]];
  return z;
}

double q_value(const SystemModel& model, const Matrix& scores,
               const SufficientStats& stats, const Theta& theta) {
  double emission = 0.0;
  for (int k = 0; k < model.K; ++k) emission += scores(k, theta.z[k]);
  return emission + log_prior_z(model, theta.z) + gamma_term(stats, theta.gamma);
}

double q_function(const SystemModel& model, const Matrix& Y,
                  const Theta& theta, const Theta& theta_ref) {
  validate_theta(model, theta);
  const Posterior post = smooth(model, Y, theta_ref);
  const SufficientStats stats = estep_stats(model, post);
  const Matrix scores = emission_scores(model, Y, post, stats);
  return q_value(model, scores, stats, theta);
}

EmStep em_step(const SystemModel& model, const Matrix& Y, const Theta& theta,
               double gamma_floor) {
  EmStep step;
  step.posterior = smooth(model, Y, theta);
  step.stats = estep_stats(model, step.posterior);
  step.scores = emission_scores(model, Y, step.posterior, step.stats);
  step.next.gamma = mstep_gamma(step.stats, gamma_floor);
  step.next.z = viterbi(step.scores, model);
  return step;
}

Theta em_iterate(const SystemModel& model, const Matrix& Y, const Theta& theta,
                 double gamma_floor) {
  return em_step(model, Y, theta, gamma_floor).next;
}

Vector fisher_gradient(const SufficientStats& stats, const Vector& gamma) {
  const double K = static_cast<double>(stats.input_power.cols());
  Vector grad(gamma.size());
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    const double mean = stats.input_power.row(i).mean();
    grad[i] = K * (mean - gamma[i]) / (2.0 * gamma[i] * gamma[i]);
  }
  return grad;
}

void validate_options(const EMOptions& opts) {
  if (opts.max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
  if (!(opts.tol_rel_L > 0.0)) throw InvalidArgument("tol_rel_L must be positive");
  if (!(opts.tol_gamma > 0.0)) throw InvalidArgument("tol_gamma must be positive");
  if (!(opts.gamma_floor >= 0.0)) throw InvalidArgument("gamma_floor must be nonnegative");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::kConverged:
      return "converged";
    case Termination::kMaxIterations:
      return "max_iterations";
    case Termination::kNonMonotone:
      return "non_monotone";
  }
  return "unknown";
}

Termination termination_from_string(std::string_view s) {
  if (s == "converged") return Termination::kConverged;
  if (s == "max_iterations") return Termination::kMaxIterations;
  if (s == "non_monotone") return Termination::kNonMonotone;
  throw InvalidArgument("unknown termination reason: " + std::string(s));
}

double relative_gamma_change(const Vector& before, const Vector& after,
                             double gamma_floor) {
  double worst = 0.0;
  const double denom_floor = std::max(gamma_floor, std::numeric_limits<double>::min());
  for (Eigen::Index i = 0; i < before.size(); ++i) {
    const double denom = std::max(before[i], denom_floor);
    worst = std::max(worst, std::abs(after[i] - before[i]) / denom);
  }
  return worst;
}

namespace {

struct Evaluation {
  double L = 0.0;
  Vector grad;
};

// L and its gradient; dense route inside the envelope, posterior moments
// outside it.
Evaluation evaluate(const SystemModel& model, const Matrix& Y, const Theta& theta,
                    const SufficientStats& stats) {
  Evaluation ev;
  if (static_cast<long>(model.K) * model.m <= kDenseEnvelope) {
    const StackedCovariance cov = build_ry(model, theta);
    ev.L = log_likelihood(cov, Y);
    ev.grad = grad_gamma(cov, Y, model.n);
  } else {
    ev.L = log_likelihood_innovations(model, Y, theta);
    ev.grad = fisher_gradient(stats, theta.gamma);
  }
  return ev;
}

}  // namespace

EMTrace run_em(const SystemModel& model, const Matrix& Y, const Theta& theta0,
               const EMOptions& opts) {
  validate_model(model);
  validate_observations(model, Y);
  validate_theta(model, theta0);
  validate_options(opts);

  using Clock = std::chrono::steady_clock;
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

  EMTrace trace;
  Theta theta = theta0;
  theta.gamma = theta.gamma.cwiseMax(opts.gamma_floor);

  double L = kNaN;
  bool have_L = false;
  for (int r = 0; r < opts.max_iters; ++r) {
    const auto start = Clock::now();
    EmStep step = em_step(model, Y, theta, opts.gamma_floor);
    const Evaluation ev = evaluate(model, Y, theta, step.stats);
    if (!have_L) {
      L = ev.L;
      have_L = true;
    }

    TraceRecord rec;
    rec.iter = r;
    rec.theta = theta;
    rec.L = L;
    rec.log_prior = log_prior_z(model, theta.z);
    rec.grad_inf_norm = ev.grad.lpNorm<Eigen::Infinity>();
    if (opts.record_Q) {
      rec.q_next = q_value(model, step.scores, step.stats, step.next);
      rec.q_self = q_value(model, step.scores, step.stats, theta);
    } else {
      rec.q_next = kNaN;
      rec.q_self = kNaN;
    }
    rec.gamma_change = relative_gamma_change(theta.gamma, step.next.gamma, opts.gamma_floor);
    for (int k = 0; k < model.K; ++k) rec.z_hamming_change += theta.z[k] != step.next.z[k];

    const double L_next = log_likelihood_auto(model, Y, step.next);
    const double objective = L + rec.log_prior;
    const double objective_next = L_next + log_prior_z(model, step.next.z);
    rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    trace.records.push_back(std::move(rec));

    if (objective_next < objective - 1e-10 * (1.0 + std::abs(objective))) {
      trace.termination = Termination::kNonMonotone;
      trace.message = "objective decreased at iteration " + std::to_string(r) + ": " +
                      std::to_string(objective) + " -> " + std::to_string(objective_next);
      trace.theta_final = theta;
      trace.L_final = L;
      trace.log_prior_final = log_prior_z(model, theta.z);
      return trace;
    }

    const bool small_L = std::abs(objective_next - objective) <=
                         opts.tol_rel_L * (1.0 + std::abs(objective));
    const bool small_gamma = trace.records.back().gamma_change <= opts.tol_gamma;
    const bool same_z = trace.records.back().z_hamming_change == 0;
    theta = std::move(step.next);
    L = L_next;
    if (small_L && small_gamma && same_z) {
      trace.termination = Termination::kConverged;
      break;
    }
  }
  if (trace.termination != Termination::kConverged) {
    trace.termination = Termination::kMaxIterations;
  }
  trace.theta_final = theta;
  trace.L_final = L;
  trace.log_prior_final = log_prior_z(model, theta.z);
  return trace;
}

}  // namespace sblem
