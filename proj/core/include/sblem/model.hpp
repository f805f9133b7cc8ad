#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace sblem {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Binary missing-data indicator, one entry per time step (1 = observed).
using Indicator = std::vector<int>;

/// Known linear system
///
///   x_k = D x_{k-1} + u_k,   x_0 = 0
///   y_k = z_k A x_k + w_k,   w_k ~ N(0, sigma2 I_m)
///
/// with a two-state Markov chain on z: P{z_k = j | z_{k-1} = j} = p_j and
/// P{z_1 = 1} = pi1.
struct SystemModel {
  Matrix D;
  Matrix A;
  double sigma2 = 1.0;
  double p0 = 0.9;
  double p1 = 0.9;
  double pi1 = 0.5;
  int n = 0;
  int m = 0;
  int K = 0;
};

/// Mixed parameter: continuous input variances and the discrete indicator.
struct Theta {
  Vector gamma;
  Indicator z;

  bool operator==(const Theta&) const = default;
};

struct SimConfig {
  int sparsity = 0;
  std::optional<std::vector<int>> support;
  double input_variance = 1.0;
  std::uint64_t seed = 0;
};

struct Dataset {
  Matrix X;  // n x K
  Matrix U;  // n x K
  Indicator zstar;
  Matrix Y;  // m x K
  std::uint64_t seed = 0;
};

/// Throws InvalidArgument naming the offending field.
void validate_model(const SystemModel& model);

/// Throws InvalidArgument if theta does not fit the model.
void validate_theta(const SystemModel& model, const Theta& theta);

/// Throws InvalidArgument if Y is not m x K.
void validate_observations(const SystemModel& model, const Matrix& Y);

/// Independent RNG sub-streams derived from one seed. Each component of a
/// simulation draws from its own stream so that changing how many numbers
/// one component consumes never perturbs the others.
enum class Stream : std::uint32_t {
  kSupport = 1,
  kInputs = 2,
  kMissing = 3,
  kNoise = 4,
  kModel = 5,
};

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream);

Indicator simulate_missing(const SystemModel& model, std::mt19937_64& rng);

/// Draws the support (unless cfg.support is given) from `support_rng` and the
/// active rows from `value_rng`.
Matrix simulate_inputs(const SystemModel& model, const SimConfig& cfg,
                       std::mt19937_64& support_rng,
                       std::mt19937_64& value_rng);

Dataset simulate(const SystemModel& model, const Matrix& U,
                 const Indicator& zstar, std::mt19937_64& noise_rng);

/// Full simulation from cfg.seed using the dedicated sub-streams.
Dataset simulate_dataset(const SystemModel& model, const SimConfig& cfg);

/// Rows of U that are not identically zero.
std::vector<int> support_of(const Matrix& U);

/// Random model with D scaled to spectral radius `rho` and A ~ N(0, 1/m).
struct RandomModelSpec {
  int n = 2;
  int m = 1;
  int K = 8;
  double sigma2 = 0.1;
  double p0 = 0.9;
  double p1 = 0.9;
  double pi1 = 0.5;
  double spectral_radius = 0.9;
  std::uint64_t seed = 0;
};

SystemModel make_random_model(const RandomModelSpec& spec);

/// gamma = 1-vector, z = all ones.
Theta default_initial_theta(const SystemModel& model);

}  // namespace sblem
