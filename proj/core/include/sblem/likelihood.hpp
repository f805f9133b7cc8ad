#pragma once

#include <Eigen/Cholesky>

#include "sblem/model.hpp"

namespace sblem {

/// Covariance of vec(Y) (time-major stacking) together with its cached
/// factorization. `loading` is B = (diag z kron A) * Dtilde, Km x Kn.
struct StackedCovariance {
  Matrix loading;
  Matrix ry;
  Matrix sigma_total;
  Eigen::LLT<Matrix> chol;
};

/// Block lower-triangular Kn x Kn matrix whose (k, j) block is D^(k-j).
Matrix build_dtilde(const SystemModel& model);

/// B = (diag z kron A) * Dtilde.
Matrix build_loading(const SystemModel& model, const Indicator& z);

/// R_Y = B (I_K kron diag gamma) B^T plus sigma2 I and its Cholesky factor.
/// Throws NumericalError if R_Y + sigma2 I is not positive definite.
StackedCovariance build_ry(const SystemModel& model, const Theta& theta);

/// Column-by-column stacking of Y.
Vector stack_observations(const Matrix& Y);

/// Exact Gaussian log-density of vec(Y) under N(0, R_Y + sigma2 I).
double log_likelihood(const SystemModel& model, const Matrix& Y,
                      const Theta& theta);
double log_likelihood(const StackedCovariance& cov, const Matrix& Y);

/// Same quantity via the prediction-error decomposition of the Kalman
/// filter. O(K (n^3 + m^3)) instead of O((Km)^3).
double log_likelihood_innovations(const SystemModel& model, const Matrix& Y,
                                  const Theta& theta);

/// Dense evaluation when Km is within the direct envelope, innovations form
/// otherwise.
double log_likelihood_auto(const SystemModel& model, const Matrix& Y,
                           const Theta& theta);

/// Largest Km for which the dense route is used by log_likelihood_auto.
inline constexpr int kDenseEnvelope = 500;

/// dL/dgamma_i = -1/2 tr(S^-1 M_i) + 1/2 y^T S^-1 M_i S^-1 y with
/// M_i = sum_k b_{k,i} b_{k,i}^T, b_{k,i} the column of B for input i at k.
Vector grad_gamma(const SystemModel& model, const Matrix& Y,
                  const Theta& theta);
Vector grad_gamma(const StackedCovariance& cov, const Matrix& Y, int n);

/// Coordinate-wise finite differences of log_likelihood with per-coordinate
/// steps. Central where gamma_i >= step_i, forward otherwise.
Vector grad_gamma_fd(const SystemModel& model, const Matrix& Y,
                     const Theta& theta, const Vector& steps);
Vector grad_gamma_fd(const SystemModel& model, const Matrix& Y,
                     const Theta& theta, double h);

/// Steps h * (1 + gamma_i).
Vector relative_fd_steps(const Vector& gamma, double h);

/// -(Km/2) log(2 pi sigma2): the supremum of L over all theta.
double likelihood_upper_bound(const SystemModel& model);

}  // namespace sblem
