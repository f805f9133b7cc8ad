#include "sblem/oracle.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "sblem/error.hpp"
#include "sblem/likelihood.hpp"

namespace sblem {

Indicator indicator_from_mask(unsigned long mask, int K) {
  Indicator z(K);
  for (int k = 0; k < K; ++k) z[k] = static_cast<int>((mask >> k) & 1UL);
  return z;
}

unsigned long mask_from_indicator(const Indicator& z) {
  unsigned long mask = 0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (z[k]) mask |= 1UL << k;
  }
  return mask;
}

OracleResult brute_force_z(const Matrix& scores, const SystemModel& model) {
  const int K = static_cast<int>(scores.rows());
  if (K > kBruteForceCap) {
    throw SizeCapExceeded("brute-force enumeration is capped at K = " +
                          std::to_string(kBruteForceCap));
  }
  if (K < 1) throw InvalidArgument("brute force needs K >= 1");

  const unsigned long count = 1UL << K;
  OracleResult result;
  result.best_value = -std::numeric_limits<double>::infinity();
  std::vector<double> values(count);
  for (unsigned long mask = 0; mask < count; ++mask) {
    values[mask] = z_objective(scores, model, indicator_from_mask(mask, K));
    if (values[mask] > result.best_value) result.best_value = values[mask];
  }
  for (unsigned long mask = 0; mask < count; ++mask) {
    if (values[mask] >= result.best_value - 1e-12) {
      result.argmax_set.push_back(indicator_from_mask(mask, K));
    }
  }
  // Among maximizers prefer the lexicographically largest (latest z_k = 1),
  // which is what the Viterbi backtrack returns on exact ties.
  result.best_z = result.argmax_set.back();
  if (K <= kOracleTableCap) result.table = std::move(values);
  return result;
}

OracleResult brute_force_z(const SystemModel& model, const Matrix& Y,
                           const Theta& theta_ref) {
  if (model.K > kBruteForceCap) {
    throw SizeCapExceeded("brute-force enumeration is capped at K = " +
                          std::to_string(kBruteForceCap));
  }
  const Posterior post = smooth(model, Y, theta_ref);
  return brute_force_z(emission_scores(model, Y, post), model);
}

double golden_section_gamma(double power_sum, int K, double gamma_floor, double hi) {
  // f(c) - f(d) written without cancellation, so the bracket can shrink to
  // rounding level instead of stalling where f is flat.
  auto diff = [&](double c, double d) {
    return -0.5 * K * std::log1p((c - d) / d) + 0.5 * power_sum * (c - d) / (c * d);
  };
  const double lo = std::max(gamma_floor, std::numeric_limits<double>::min());
  double a = lo;
  double b = std::max(hi, a);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  for (int it = 0; it < 400 && (b - a) > 1e-15 * (1.0 + std::abs(b)); ++it) {
    if (diff(c, d) >= 0.0) {
      b = d;
      d = c;
      c = b - inv_phi * (b - a);
    } else {
      a = c;
      c = d;
      d = a + inv_phi * (b - a);
    }
  }
  // The maximizer may sit on the floor.
  const double best = 0.5 * (a + b);
  return best > lo && diff(lo, best) > 0.0 ? lo : best;
}

Vector brute_force_gamma(const SufficientStats& stats, double gamma_floor) {
  const Eigen::Index n = stats.input_power.rows();
  const int K = static_cast<int>(stats.input_power.cols());
  Vector gamma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = 10.0 * stats.input_power.row(i).maxCoeff();
    if (!(hi > gamma_floor)) {
      gamma[i] = gamma_floor;
      continue;
    }
    gamma[i] = golden_section_gamma(stats.input_power.row(i).sum(), K, gamma_floor, hi);
  }
  return gamma;
}

Vector brute_force_gamma(const SystemModel& model, const Matrix& Y,
                         const Theta& theta_ref, double gamma_floor) {
  return brute_force_gamma(estep_stats(model, smooth(model, Y, theta_ref)), gamma_floor);
}

std::pair<Vector, double> gamma_only_em(const SystemModel& model, const Matrix& Y,
                                        const Indicator& z, Vector gamma0,
                                        const ExhaustiveMlOptions& opts) {
  Theta theta{std::move(gamma0), z};
  theta.gamma = theta.gamma.cwiseMax(opts.gamma_floor);
  double L_prev = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0;; ++it) {
    const FilterResult fr = kalman_filter(model, Y, theta);
    double L = 0.0;
    for (double v : fr.innovation_logpdf) L += v;
    const bool done = (it > 0 && std::abs(L - L_prev) <= opts.tol * (1.0 + std::abs(L))) ||
                      it >= opts.max_iters;
    // A z-frozen EM step can only raise L; keep the better end point.
    if (done) return {theta.gamma, L};
    L_prev = L;
    const SufficientStats stats = estep_stats(model, rts_smoother(model, fr));
    theta.gamma = mstep_gamma(stats, opts.gamma_floor);
  }
}

ExhaustiveMlResult exhaustive_ml(const SystemModel& model, const Matrix& Y,
                                 const ExhaustiveMlOptions& opts,
                                 const std::optional<Theta>& warm_start) {
  validate_model(model);
  if (warm_start) validate_theta(model, *warm_start);
  validate_observations(model, Y);
  if (model.K > kExhaustiveMlMaxK || model.n > kExhaustiveMlMaxN) {
    throw SizeCapExceeded("exhaustive ML is capped at K <= " +
                          std::to_string(kExhaustiveMlMaxK) + " and n <= " +
                          std::to_string(kExhaustiveMlMaxN));
  }
  ExhaustiveMlResult result;
  result.L_best = -std::numeric_limits<double>::infinity();
  const unsigned long count = 1UL << model.K;
  result.table.reserve(count);
  for (unsigned long mask = 0; mask < count; ++mask) {
    ExhaustiveMlEntry entry;
    entry.z = indicator_from_mask(mask, model.K);
    entry.L = -std::numeric_limits<double>::infinity();
    std::vector<Vector> starts{Vector::Constant(model.n, 1.0), Vector::Constant(model.n, 1e-2)};
    if (warm_start && warm_start->z == entry.z) starts.push_back(warm_start->gamma);
    for (const Vector& start : starts) {
      auto [gamma, L] = gamma_only_em(model, Y, entry.z, start, opts);
      if (L > entry.L) {
        entry.L = L;
        entry.gamma = std::move(gamma);
      }
    }
    if (entry.L > result.L_best) {
      result.L_best = entry.L;
      result.z_best = entry.z;
      result.gamma_best = entry.gamma;
    }
    result.table.push_back(std::move(entry));
  }
  return result;
}

}  // namespace sblem
