#pragma once

#include <optional>
#include <vector>

#include "sblem/em.hpp"

namespace sblem {

/// Exhaustive search over z in {0,1}^K.
struct OracleResult {
  Indicator best_z;
  double best_value = 0.0;
  /// Objective of every z, indexed by the bitmask sum_k z_k 2^k. Only filled
  /// for K <= kOracleTableCap.
  std::optional<std::vector<double>> table;
  /// All z within 1e-12 of best_value.
  std::vector<Indicator> argmax_set;
};

inline constexpr int kBruteForceCap = 20;
inline constexpr int kOracleTableCap = 12;
inline constexpr int kExhaustiveMlMaxK = 12;
inline constexpr int kExhaustiveMlMaxN = 5;

/// Bitmask <-> indicator with bit k = z_k.
Indicator indicator_from_mask(unsigned long mask, int K);
unsigned long mask_from_indicator(const Indicator& z);

/// Enumerates z_objective over all 2^K sequences for a fixed score table.
OracleResult brute_force_z(const Matrix& scores, const SystemModel& model);

/// Same, with scores taken from the posterior under theta_ref.
OracleResult brute_force_z(const SystemModel& model, const Matrix& Y,
                           const Theta& theta_ref);

/// Golden-section maximization of one coordinate of the gamma-term:
///   f(g) = -(K/2) log(2 pi g) - P / (2 g),  P = sum_k E[u_k^2],
/// on [floor, hi].
double golden_section_gamma(double power_sum, int K, double gamma_floor, double hi);

/// Per-coordinate golden-section search on [floor, 10 max_k E[u_{k,i}^2]].
Vector brute_force_gamma(const SufficientStats& stats, double gamma_floor);
Vector brute_force_gamma(const SystemModel& model, const Matrix& Y,
                         const Theta& theta_ref,
                         double gamma_floor = kDefaultGammaFloor);

struct ExhaustiveMlEntry {
  Indicator z;
  Vector gamma;
  double L = 0.0;
};

struct ExhaustiveMlResult {
  Indicator z_best;
  Vector gamma_best;
  double L_best = 0.0;
  std::vector<ExhaustiveMlEntry> table;  // one entry per z, mask order
};

struct ExhaustiveMlOptions {
  double tol = 1e-10;
  int max_iters = 5000;
  double gamma_floor = kDefaultGammaFloor;
};

/// For each z, maximizes L([gamma; z]) over gamma with z-frozen EM from
/// gamma = 1 and gamma = 1e-2 (best of the two), then takes the best z.
/// A warm start adds a third start for its own z, so the search provably
/// covers that point.
ExhaustiveMlResult exhaustive_ml(const SystemModel& model, const Matrix& Y,
                                 const ExhaustiveMlOptions& opts = {},
                                 const std::optional<Theta>& warm_start = std::nullopt);

/// EM over gamma only with z frozen; returns the final gamma and L.
std::pair<Vector, double> gamma_only_em(const SystemModel& model, const Matrix& Y,
                                        const Indicator& z, Vector gamma0,
                                        const ExhaustiveMlOptions& opts);

}  // namespace sblem
