#include "uq/processes.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace uq {

using ad::Var;

namespace {
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
}

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Samplable: return "samplable";
    case Family::Variational: return "variational";
    case Family::Trainable: return "trainable";
  }
  return "samplable";
}

VariableSpec VariableSpec::samplable(Prior prior) {
  VariableSpec v;
  v.family = Family::Samplable;
  v.prior = prior;
  return v;
}

VariableSpec VariableSpec::variational_family(Prior prior, VariationalParams params) {
  VariableSpec v;
  v.family = Family::Variational;
  v.prior = prior;
  v.variational = std::move(params);
  return v;
}

VariableSpec VariableSpec::trainable(double l2_weight, InitStrategy init, double init_value) {
  VariableSpec v;
  v.family = Family::Trainable;
  v.l2_weight = l2_weight;
  v.init = init;
  v.init_value = init_value;
  return v;
}

void VariableSpec::validate(std::optional<std::size_t> n_params) const {
  switch (family) {
    case Family::Samplable:
      if (!prior || variational) {
        throw FamilyMismatch("samplable variables need a prior and no variational parameters");
      }
      break;
    case Family::Variational:
      if (!prior || !variational) {
        throw FamilyMismatch("variational variables need a prior and variational parameters");
      }
      if (variational->mean.size() != variational->rho.size()) {
        throw DimensionMismatch("variational mean and rho differ in length");
      }
      if (n_params && variational->mean.size() != *n_params) {
        throw DimensionMismatch(fmt::format("variational parameters have length {}, surrogate {}",
                                            variational->mean.size(), *n_params));
      }
      break;
    case Family::Trainable:
      if (prior || variational) {
        throw FamilyMismatch("trainable variables carry neither prior nor variational parameters");
      }
      if (l2_weight < 0.0) throw FamilyMismatch("negative L2 weight");
      break;
  }
}

template <class T>
T log_prior_density(const Prior& prior, std::span<const T> theta) {
  using std::log;
  return std::visit(
      [&](const auto& p) -> T {
        using P = std::decay_t<decltype(p)>;
        const double n = static_cast<double>(theta.size());
        if constexpr (std::is_same_v<P, NormalPrior>) {
          T sq(0.0);
          for (const T& t : theta) {
            const T z = (t - p.mean) * (1.0 / p.std);
            sq = sq + z * z;
          }
          return -0.5 * sq - n * (kHalfLog2Pi + std::log(p.std));
        } else if constexpr (std::is_same_v<P, HalfNormalPrior>) {
          T sq(0.0);
          for (const T& t : theta) {
            if (ad::value_of(t) < 0.0) return T(kLogZero);
            const T z = t * (1.0 / p.std);
            sq = sq + z * z;
          }
          return -0.5 * sq + n * (std::log(2.0) - kHalfLog2Pi - std::log(p.std));
        } else {
          T acc(0.0);
          for (const T& t : theta) {
            if (ad::value_of(t) <= 0.0) return T(kLogZero);
            const T lt = log(t);
            const T z = (lt - p.mean) * (1.0 / p.std);
            acc = acc - 0.5 * (z * z) - lt;
          }
          return acc - n * (kHalfLog2Pi + std::log(p.std));
        }
      },
      prior);
}

double log_prior(const VariableSpec& var, std::span<const double> theta) {
  if (var.family == Family::Trainable || !var.prior) {
    throw FamilyMismatch("log_prior is undefined for trainable variables");
  }
  for (double t : theta) {
    if (!std::isfinite(t)) throw NonFiniteValue("log_prior at a non-finite parameter");
  }
  return log_prior_density<double>(*var.prior, theta);
}

template <class T>
std::vector<T> reparameterize(std::span<const T> mean, std::span<const T> rho,
                              std::span<const double> noise) {
  if (mean.size() != rho.size() || mean.size() != noise.size()) {
    throw DimensionMismatch("reparameterization inputs differ in length");
  }
  std::vector<T> theta;
  theta.reserve(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    theta.push_back(mean[i] + ad::softplus(rho[i]) * noise[i]);
  }
  return theta;
}

ParamVector variational_sample(const VariableSpec& var, std::span<const double> noise) {
  if (var.family != Family::Variational || !var.variational) {
    throw FamilyMismatch("variational_sample needs a variational variable");
  }
  return reparameterize<double>(var.variational->mean, var.variational->rho, noise);
}

double variational_log_density(const VariationalParams& q, std::span<const double> theta) {
  if (theta.size() != q.mean.size()) throw DimensionMismatch("density argument length");
  double acc = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double s = ad::softplus(q.rho[i]);
    const double z = (theta[i] - q.mean[i]) / s;
    acc += -0.5 * z * z - std::log(s) - kHalfLog2Pi;
  }
  return acc;
}

template <class T>
T kl_diag_normal(std::span<const T> mean, std::span<const T> rho, const NormalPrior& prior) {
  using std::log;
  if (mean.size() != rho.size()) throw DimensionMismatch("kl inputs differ in length");
  const double inv_var_p = 1.0 / (prior.std * prior.std);
  T acc(0.0);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const T sq = ad::softplus(rho[i]);
    const T dm = mean[i] - prior.mean;
    acc = acc + (std::log(prior.std) - log(sq)) + 0.5 * inv_var_p * (sq * sq + dm * dm) - 0.5;
  }
  return acc;
}

double kl_to_prior(const VariableSpec& var) {
  if (var.family != Family::Variational || !var.variational || !var.prior) {
    throw FamilyMismatch("kl_to_prior needs a variational variable");
  }
  const auto* normal = std::get_if<NormalPrior>(&*var.prior);
  if (normal == nullptr) throw FamilyMismatch("kl_to_prior needs a Normal prior");
  return kl_diag_normal<double>(var.variational->mean, var.variational->rho, *normal);
}

bool Process::log_space() const {
  return variable.prior && std::holds_alternative<LogNormalPrior>(*variable.prior);
}

template <class T>
std::vector<T> Process::to_surrogate(std::span<const T> coords) const {
  std::vector<T> out(coords.begin(), coords.end());
  if (log_space()) {
    using std::exp;
    for (T& c : out) c = exp(c);
  }
  return out;
}

template <class T>
T Process::log_prior_coords(std::span<const T> coords) const {
  if (!variable.prior) throw FamilyMismatch("process '" + key + "' has no prior");
  if (const auto* ln = std::get_if<LogNormalPrior>(&*variable.prior)) {
    // density of log(theta) is Normal(mean, std)
    return log_prior_density<T>(NormalPrior{ln->mean, ln->std}, coords);
  }
  return log_prior_density<T>(*variable.prior, coords);
}

template double log_prior_density<double>(const Prior&, std::span<const double>);
template Var log_prior_density<Var>(const Prior&, std::span<const Var>);
template std::vector<double> reparameterize<double>(std::span<const double>,
                                                    std::span<const double>,
                                                    std::span<const double>);
template std::vector<Var> reparameterize<Var>(std::span<const Var>, std::span<const Var>,
                                              std::span<const double>);
template double kl_diag_normal<double>(std::span<const double>, std::span<const double>,
                                       const NormalPrior&);
template Var kl_diag_normal<Var>(std::span<const Var>, std::span<const Var>, const NormalPrior&);
template std::vector<double> Process::to_surrogate<double>(std::span<const double>) const;
template std::vector<Var> Process::to_surrogate<Var>(std::span<const Var>) const;
template double Process::log_prior_coords<double>(std::span<const double>) const;
template Var Process::log_prior_coords<Var>(std::span<const Var>) const;

}  // namespace uq
