#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "uq/surrogates.hpp"

namespace uq {

enum class Family { Samplable, Variational, Trainable };

std::string_view family_name(Family f);

struct NormalPrior {
  double mean = 0.0;
  double std = 1.0;
};

struct HalfNormalPrior {
  double std = 1.0;
};

struct LogNormalPrior {
  double mean = 0.0;  // of log(theta)
  double std = 1.0;
};

using Prior = std::variant<NormalPrior, HalfNormalPrior, LogNormalPrior>;

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

struct VariationalParams {
  ParamVector mean;
  ParamVector rho;  // scale = softplus(rho)
};

enum class InitStrategy { Default, Zeros, Constant };

struct VariableSpec {
  Family family = Family::Samplable;
  std::optional<Prior> prior;
  std::optional<VariationalParams> variational;
  InitStrategy init = InitStrategy::Default;
  double init_value = 0.0;
  double l2_weight = 0.0;

  static VariableSpec samplable(Prior prior = NormalPrior{});
  static VariableSpec variational_family(Prior prior, VariationalParams params);
  static VariableSpec trainable(double l2_weight = 0.0, InitStrategy init = InitStrategy::Default,
                                double init_value = 0.0);

  // Checks the family invariants and, when given, the parameter count.
  void validate(std::optional<std::size_t> n_params = std::nullopt) const;
};

// Exact log density of the prior at theta, including normalization.
// Returns kLogZero outside the support.
template <class T>
T log_prior_density(const Prior& prior, std::span<const T> theta);

double log_prior(const VariableSpec& var, std::span<const double> theta);

// theta = m + softplus(rho) * noise.
template <class T>
std::vector<T> reparameterize(std::span<const T> mean, std::span<const T> rho,
                              std::span<const double> noise);

ParamVector variational_sample(const VariableSpec& var, std::span<const double> noise);

// log N(theta | m, softplus(rho)^2), diagonal.
double variational_log_density(const VariationalParams& q, std::span<const double> theta);

// Closed-form KL(q || prior) for diagonal Gaussians.
template <class T>
T kl_diag_normal(std::span<const T> mean, std::span<const T> rho, const NormalPrior& prior);

double kl_to_prior(const VariableSpec& var);

struct Process {
  std::string key;
  Surrogate surrogate;
  VariableSpec variable;

  std::size_t param_count() const { return uq::param_count(surrogate); }

  // Samplers move in an unconstrained coordinate. For a LogNormal prior the
  // coordinate is log(theta) and the surrogate sees exp(coordinate).
  bool log_space() const;

  template <class T>
  std::vector<T> to_surrogate(std::span<const T> coords) const;

  // Prior log density expressed in sampler coordinates (Jacobian included).
  template <class T>
  T log_prior_coords(std::span<const T> coords) const;
};

}  // namespace uq
