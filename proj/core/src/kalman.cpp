#include "sblem/kalman.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

#include "sblem/error.hpp"

namespace sblem {

namespace {

Matrix symmetrize(const Matrix& P) { return 0.5 * (P + P.transpose()); }

}  // namespace

double gaussian_logpdf(const Vector& y, const Vector& mean, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("innovation covariance is not positive definite");
  }
  const Vector r = llt.matrixL().solve(y - mean);
  const double logdet =
      2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi) +
                 logdet + r.squaredNorm());
}

FilterResult kalman_filter(const SystemModel& model, const Matrix& Y,
                           const Theta& theta) {
  validate_model(model);
  validate_observations(model, Y);
  validate_theta(model, theta);

  const int n = model.n;
  const int m = model.m;
  const int K = model.K;
  const Matrix process = theta.gamma.asDiagonal();
  const Matrix noise = model.sigma2 * Matrix::Identity(m, m);
  const Matrix eye = Matrix::Identity(n, n);

  FilterResult fr;
  fr.predicted_mean.reserve(K);
  fr.predicted_cov.reserve(K);
  fr.filtered_mean.reserve(K);
  fr.filtered_cov.reserve(K);
  fr.gain.reserve(K);
  fr.innovation_logpdf.reserve(K);

  Vector mean = Vector::Zero(n);
  Matrix cov = Matrix::Zero(n, n);
  for (int k = 0; k < K; ++k) {
    Vector pred_mean = model.D * mean;
    Matrix pred_cov = symmetrize(model.D * cov * model.D.transpose() + process);
    const Vector y = Y.col(k);

    if (theta.z[k] == 1) {
      const Matrix S = symmetrize(model.A * pred_cov * model.A.transpose() + noise);
      Eigen::LLT<Matrix> llt(S);
      if (llt.info() != Eigen::Success) {
        throw NumericalError("innovation covariance is not positive definite at step " +
                             std::to_string(k + 1));
      }
      const Vector innovation = y - model.A * pred_mean;
      const Matrix gain = llt.solve(model.A * pred_cov).transpose();
      const Vector whitened = llt.matrixL().solve(innovation);
      const double logdet =
          2.0 * llt.matrixLLT().diagonal().array().log().sum();
      fr.innovation_logpdf.push_back(
          -0.5 * (m * std::log(2.0 * std::numbers::pi) + logdet + whitened.squaredNorm()));

      // Joseph form keeps the update PSD.
      const Matrix IKA = eye - gain * model.A;
      mean = pred_mean + gain * innovation;
      cov = symmetrize(IKA * pred_cov * IKA.transpose() +
                       model.sigma2 * gain * gain.transpose());
      fr.gain.push_back(gain);
    } else {
      fr.innovation_logpdf.push_back(
          -0.5 * (m * std::log(2.0 * std::numbers::pi * model.sigma2) +
                  y.squaredNorm() / model.sigma2));
      mean = pred_mean;
      cov = pred_cov;
      fr.gain.push_back(Matrix::Zero(n, m));
    }
    fr.predicted_mean.push_back(std::move(pred_mean));
    fr.predicted_cov.push_back(std::move(pred_cov));
    fr.filtered_mean.push_back(mean);
    fr.filtered_cov.push_back(cov);
  }
  return fr;
}

Posterior rts_smoother(const SystemModel& model, const FilterResult& fr) {
  const int K = static_cast<int>(fr.filtered_mean.size());
  if (K == 0 || static_cast<int>(fr.predicted_cov.size()) != K) {
    throw InvalidArgument("filter result is incomplete");
  }
  const int n = static_cast<int>(fr.filtered_mean[0].size());

  Posterior post;
  post.mean.resize(K);
  post.cov.resize(K);
  post.cross_cov.assign(K, Matrix::Zero(n, n));

  post.mean[K - 1] = fr.filtered_mean[K - 1];
  post.cov[K - 1] = fr.filtered_cov[K - 1];
  for (int k = K - 2; k >= 0; --k) {
    const Matrix& next_pred = fr.predicted_cov[k + 1];
    // J = P_{k|k} D^T P_{k+1|k}^{-1}, solved without forming the inverse.
    Eigen::LLT<Matrix> llt(next_pred);
    Matrix J;
    if (llt.info() == Eigen::Success) {
      J = llt.solve(model.D * fr.filtered_cov[k]).transpose();
    } else {
      Eigen::LDLT<Matrix> ldlt(next_pred);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        throw NumericalError("singular predicted covariance in smoother gain at step " +
                             std::to_string(k + 2));
      }
      J = ldlt.solve(model.D * fr.filtered_cov[k]).transpose();
    }
    if (!J.allFinite()) {
      throw NumericalError("non-finite smoother gain at step " + std::to_string(k + 1));
    }
    post.mean[k] = fr.filtered_mean[k] +
                   J * (post.mean[k + 1] - fr.predicted_mean[k + 1]);
    post.cov[k] = symmetrize(fr.filtered_cov[k] +
                             J * (post.cov[k + 1] - next_pred) * J.transpose());
    // Cov(x_{k+1}, x_k | Y) = P_{k+1|K} J_k^T.
    post.cross_cov[k + 1] = post.cov[k + 1] * J.transpose();
  }
  return post;
}

Posterior smooth(const SystemModel& model, const Matrix& Y, const Theta& theta) {
  return rts_smoother(model, kalman_filter(model, Y, theta));
}

}  // namespace sblem
