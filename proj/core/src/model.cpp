#include "sblem/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "sblem/error.hpp"

namespace sblem {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument(message);
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void validate_model(const SystemModel& model) {
  require(model.n >= 1, "n must be at least 1");
  require(model.m >= 1, "m must be at least 1");
  require(model.K >= 1, "K must be at least 1");
  require(model.D.rows() == model.n && model.D.cols() == model.n,
          "dimension mismatch: D must be n x n");
  require(model.A.rows() == model.m && model.A.cols() == model.n,
          "dimension mismatch: A must be m x n");
  require(std::isfinite(model.sigma2) && model.sigma2 > 0.0,
          "sigma2 must be positive");
  require(is_probability(model.p0), "p0 must lie in [0, 1]");
  require(is_probability(model.p1), "p1 must lie in [0, 1]");
  require(is_probability(model.pi1), "pi1 must lie in [0, 1]");
  require(model.D.allFinite(), "D must be finite");
  require(model.A.allFinite(), "A must be finite");
}

void validate_theta(const SystemModel& model, const Theta& theta) {
  require(theta.gamma.size() == model.n,
          "dimension mismatch: gamma must have n entries");
  require(static_cast<int>(theta.z.size()) == model.K,
          "dimension mismatch: z must have K entries");
  for (Eigen::Index i = 0; i < theta.gamma.size(); ++i) {
    require(std::isfinite(theta.gamma[i]) && theta.gamma[i] >= 0.0,
            "gamma must be finite and nonnegative");
  }
  for (int zk : theta.z) require(zk == 0 || zk == 1, "z entries must be 0 or 1");
}

void validate_observations(const SystemModel& model, const Matrix& Y) {
  require(Y.rows() == model.m && Y.cols() == model.K,
          "dimension mismatch: Y must be m x K");
  require(Y.allFinite(), "Y must be finite");
}

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5b1e3u};
  return std::mt19937_64(seq);
}

Indicator simulate_missing(const SystemModel& model, std::mt19937_64& rng) {
  validate_model(model);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Indicator z(model.K);
  z[0] = unif(rng) < model.pi1 ? 1 : 0;
  for (int k = 1; k < model.K; ++k) {
    const double stay = z[k - 1] == 1 ? model.p1 : model.p0;
    z[k] = unif(rng) < stay ? z[k - 1] : 1 - z[k - 1];
  }
  return z;
}

Matrix simulate_inputs(const SystemModel& model, const SimConfig& cfg,
                       std::mt19937_64& support_rng,
                       std::mt19937_64& value_rng) {
  validate_model(model);
  require(cfg.sparsity >= 0 && cfg.sparsity <= model.n,
          "sparsity must lie in [0, n]");
  require(cfg.input_variance >= 0.0, "input_variance must be nonnegative");

  std::vector<int> support;
  if (cfg.support) {
    support = *cfg.support;
    std::sort(support.begin(), support.end());
    require(std::adjacent_find(support.begin(), support.end()) == support.end(),
            "support entries must be distinct");
    for (int i : support) require(i >= 0 && i < model.n, "support index out of range");
    require(static_cast<int>(support.size()) == cfg.sparsity,
            "support size must equal sparsity");
  } else {
    std::vector<int> idx(model.n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), support_rng);
    support.assign(idx.begin(), idx.begin() + cfg.sparsity);
    std::sort(support.begin(), support.end());
  }

  Matrix U = Matrix::Zero(model.n, model.K);
  std::normal_distribution<double> normal(0.0, std::sqrt(cfg.input_variance));
  for (int i : support) {
    for (int k = 0; k < model.K; ++k) U(i, k) = normal(value_rng);
  }
  return U;
}

Dataset simulate(const SystemModel& model, const Matrix& U,
                 const Indicator& zstar, std::mt19937_64& noise_rng) {
  validate_model(model);
  require(U.rows() == model.n && U.cols() == model.K,
          "dimension mismatch: U must be n x K");
  require(static_cast<int>(zstar.size()) == model.K,
          "dimension mismatch: zstar must have K entries");

  Dataset ds;
  ds.U = U;
  ds.zstar = zstar;
  ds.X.resize(model.n, model.K);
  ds.Y.resize(model.m, model.K);

  std::normal_distribution<double> noise(0.0, std::sqrt(model.sigma2));
  Vector prev = Vector::Zero(model.n);
  for (int k = 0; k < model.K; ++k) {
    ds.X.col(k) = model.D * prev + U.col(k);
    prev = ds.X.col(k);
    Vector w(model.m);
    for (int j = 0; j < model.m; ++j) w[j] = noise(noise_rng);
    if (zstar[k] == 1) {
      ds.Y.col(k) = model.A * ds.X.col(k) + w;
    } else {
      ds.Y.col(k) = w;
    }
  }
  return ds;
}

Dataset simulate_dataset(const SystemModel& model, const SimConfig& cfg) {
  auto support_rng = make_stream(cfg.seed, Stream::kSupport);
  auto value_rng = make_stream(cfg.seed, Stream::kInputs);
  auto missing_rng = make_stream(cfg.seed, Stream::kMissing);
  auto noise_rng = make_stream(cfg.seed, Stream::kNoise);

  const Matrix U = simulate_inputs(model, cfg, support_rng, value_rng);
  const Indicator zstar = simulate_missing(model, missing_rng);
  Dataset ds = simulate(model, U, zstar, noise_rng);
  ds.seed = cfg.seed;
  return ds;
}

std::vector<int> support_of(const Matrix& U) {
  std::vector<int> rows;
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    if ((U.row(i).array() != 0.0).any()) rows.push_back(static_cast<int>(i));
  }
  return rows;
}

SystemModel make_random_model(const RandomModelSpec& spec) {
  require(spec.n >= 1 && spec.m >= 1 && spec.K >= 1,
          "random model dimensions must be positive");
  require(spec.spectral_radius >= 0.0, "spectral_radius must be nonnegative");

  auto rng = make_stream(spec.seed, Stream::kModel);
  std::normal_distribution<double> normal(0.0, 1.0);

  SystemModel model;
  model.n = spec.n;
  model.m = spec.m;
  model.K = spec.K;
  model.sigma2 = spec.sigma2;
  model.p0 = spec.p0;
  model.p1 = spec.p1;
  model.pi1 = spec.pi1;

  Matrix G(spec.n, spec.n);
  for (Eigen::Index j = 0; j < G.cols(); ++j)
    for (Eigen::Index i = 0; i < G.rows(); ++i) G(i, j) = normal(rng);
  const double radius = Eigen::EigenSolver<Matrix>(G, false)
                            .eigenvalues()
                            .cwiseAbs()
                            .maxCoeff();
  model.D = radius > 0.0 ? Matrix(G * (spec.spectral_radius / radius))
                         : Matrix::Zero(spec.n, spec.n);

  model.A.resize(spec.m, spec.n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.m));
  for (Eigen::Index j = 0; j < model.A.cols(); ++j)
    for (Eigen::Index i = 0; i < model.A.rows(); ++i)
      model.A(i, j) = scale * normal(rng);

  validate_model(model);
  return model;
}

Theta default_initial_theta(const SystemModel& model) {
  return Theta{Vector::Ones(model.n), Indicator(model.K, 1)};
}

}  // namespace sblem
