#include "sblem/likelihood.hpp"

#include <cmath>
#include <numbers>

#include "sblem/error.hpp"
#include "sblem/kalman.hpp"

namespace sblem {

Matrix build_dtilde(const SystemModel& model) {
  validate_model(model);
  const int n = model.n;
  const int K = model.K;
  Matrix dt = Matrix::Zero(static_cast<Eigen::Index>(K) * n,
                           static_cast<Eigen::Index>(K) * n);
  Matrix power = Matrix::Identity(n, n);  // D^(k-j)
  for (int lag = 0; lag < K; ++lag) {
    for (int j = 0; j + lag < K; ++j) {
      dt.block((j + lag) * n, j * n, n, n) = power;
    }
    power = model.D * power;
  }
  return dt;
}

Matrix build_loading(const SystemModel& model, const Indicator& z) {
  validate_model(model);
  if (static_cast<int>(z.size()) != model.K) {
    throw InvalidArgument("dimension mismatch: z must have K entries");
  }
  const int n = model.n;
  const int m = model.m;
  const int K = model.K;
  Matrix B = Matrix::Zero(static_cast<Eigen::Index>(K) * m,
                          static_cast<Eigen::Index>(K) * n);
  Matrix block = model.A;  // A D^(k-j)
  for (int lag = 0; lag < K; ++lag) {
    for (int j = 0; j + lag < K; ++j) {
      if (z[j + lag] == 1) B.block((j + lag) * m, j * n, m, n) = block;
    }
    block = block * model.D;
  }
  return B;
}

StackedCovariance build_ry(const SystemModel& model, const Theta& theta) {
  validate_model(model);
  validate_theta(model, theta);
  StackedCovariance cov;
  cov.loading = build_loading(model, theta.z);
  const Vector stacked_gamma = theta.gamma.replicate(model.K, 1);
  const Matrix scaled = cov.loading * stacked_gamma.cwiseSqrt().asDiagonal();
  cov.ry = scaled * scaled.transpose();
  cov.ry = 0.5 * (cov.ry + cov.ry.transpose());
  cov.sigma_total = cov.ry;
  cov.sigma_total.diagonal().array() += model.sigma2;
  cov.chol.compute(cov.sigma_total);
  if (cov.chol.info() != Eigen::Success) {
    throw NumericalError("R_Y + sigma2 I is not positive definite");
  }
  return cov;
}

Vector stack_observations(const Matrix& Y) {
  return Eigen::Map<const Vector>(Y.data(), Y.size());
}

double log_likelihood(const StackedCovariance& cov, const Matrix& Y) {
  const Vector y = stack_observations(Y);
  const Vector whitened = cov.chol.matrixL().solve(y);
  const double logdet = 2.0 * cov.chol.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi) +
                 logdet + whitened.squaredNorm());
}

double log_likelihood(const SystemModel& model, const Matrix& Y,
                      const Theta& theta) {
  validate_observations(model, Y);
  return log_likelihood(build_ry(model, theta), Y);
}

double log_likelihood_innovations(const SystemModel& model, const Matrix& Y,
                                  const Theta& theta) {
  const FilterResult fr = kalman_filter(model, Y, theta);
  double total = 0.0;
  for (double v : fr.innovation_logpdf) total += v;
  return total;
}

double log_likelihood_auto(const SystemModel& model, const Matrix& Y,
                           const Theta& theta) {
  if (static_cast<long>(model.K) * model.m <= kDenseEnvelope) {
    return log_likelihood(model, Y, theta);
  }
  return log_likelihood_innovations(model, Y, theta);
}

Vector grad_gamma(const StackedCovariance& cov, const Matrix& Y, int n) {
  const Vector alpha = cov.chol.solve(stack_observations(Y));
  // W = L^{-1} B: squared column norms give b^T S^{-1} b.
  const Matrix W = cov.chol.matrixL().solve(cov.loading);
  const Vector trace_terms = W.colwise().squaredNorm().transpose();
  const Vector projections = cov.loading.transpose() * alpha;

  const Eigen::Index K = cov.loading.cols() / n;
  Vector grad = Vector::Zero(n);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (int i = 0; i < n; ++i) {
      const Eigen::Index c = k * n + i;
      grad[i] += 0.5 * (projections[c] * projections[c] - trace_terms[c]);
    }
  }
  return grad;
}

Vector grad_gamma(const SystemModel& model, const Matrix& Y,
                  const Theta& theta) {
  validate_observations(model, Y);
  return grad_gamma(build_ry(model, theta), Y, model.n);
}

Vector relative_fd_steps(const Vector& gamma, double h) {
  return (h * (1.0 + gamma.array())).matrix();
}

Vector grad_gamma_fd(const SystemModel& model, const Matrix& Y,
                     const Theta& theta, const Vector& steps) {
  validate_theta(model, theta);
  if (steps.size() != model.n) {
    throw InvalidArgument("dimension mismatch: one step per gamma coordinate");
  }
  Vector grad(model.n);
  for (int i = 0; i < model.n; ++i) {
    const double h = steps[i];
    if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
    Theta plus = theta;
    plus.gamma[i] += h;
    if (theta.gamma[i] >= h) {
      Theta minus = theta;
      minus.gamma[i] -= h;
      grad[i] = (log_likelihood(model, Y, plus) - log_likelihood(model, Y, minus)) /
                (2.0 * h);
    } else {
      grad[i] = (log_likelihood(model, Y, plus) - log_likelihood(model, Y, theta)) / h;
    }
  }
  return grad;
}

Vector grad_gamma_fd(const SystemModel& model, const Matrix& Y,
                     const Theta& theta, double h) {
  return grad_gamma_fd(model, Y, theta, Vector::Constant(model.n, h));
}

double likelihood_upper_bound(const SystemModel& model) {
  return -0.5 * static_cast<double>(model.K) * model.m *
         std::log(2.0 * std::numbers::pi * model.sigma2);
}

}  // namespace sblem
