#pragma once

#include <vector>

#include "sblem/model.hpp"

namespace sblem {

/// Forward pass under the input-variance prior u_k ~ N(0, diag gamma).
/// Index k = 0..K-1 corresponds to time k+1.
struct FilterResult {
  std::vector<Vector> predicted_mean;
  std::vector<Matrix> predicted_cov;
  std::vector<Vector> filtered_mean;
  std::vector<Matrix> filtered_cov;
  std::vector<Matrix> gain;  // n x m, zero where z_k = 0
  std::vector<double> innovation_logpdf;
};

/// Smoothed moments given all K observations. cross_cov[k] is
/// Cov(x_k, x_{k-1} | Y); cross_cov[0] is zero because x_0 = 0.
struct Posterior {
  std::vector<Vector> mean;
  std::vector<Matrix> cov;
  std::vector<Matrix> cross_cov;
};

FilterResult kalman_filter(const SystemModel& model, const Matrix& Y,
                           const Theta& theta);

Posterior rts_smoother(const SystemModel& model, const FilterResult& fr);

/// Filter followed by smoother.
Posterior smooth(const SystemModel& model, const Matrix& Y,
                 const Theta& theta);

/// Log-density of y under N(mean, cov); cov must be positive definite.
double gaussian_logpdf(const Vector& y, const Vector& mean, const Matrix& cov);

}  // namespace sblem
