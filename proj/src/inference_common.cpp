#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>

#include "uq/inference.hpp"

namespace uq {

Method parse_method(std::string_view name) {
  for (Method m : all_methods()) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError(fmt::format("unknown inference method '{}'", name));
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Hmc: return "hmc";
    case Method::Mala: return "mala";
    case Method::Ld: return "ld";
    case Method::Mfvi: return "mfvi";
    case Method::Mcd: return "mcd";
    case Method::Dens: return "dens";
    case Method::Sens: return "sens";
    case Method::La: return "la";
  }
  return "hmc";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> kAll = {Method::Hmc,  Method::Mala, Method::Ld,
                                           Method::Mfvi, Method::Mcd,  Method::Dens,
                                           Method::Sens, Method::La};
  return kAll;
}

Family method_family(Method m) {
  switch (m) {
    case Method::Hmc:
    case Method::Mala:
    case Method::Ld: return Family::Samplable;
    case Method::Mfvi: return Family::Variational;
    default: return Family::Trainable;
  }
}

InitMode parse_init_mode(std::string_view name) {
  if (name == "default") return InitMode::Default;
  if (name == "prior") return InitMode::Prior;
  if (name == "map") return InitMode::Map;
  throw ConfigError(fmt::format("unknown init mode '{}'", name));
}

std::string_view init_mode_name(InitMode m) {
  switch (m) {
    case InitMode::Default: return "default";
    case InitMode::Prior: return "prior";
    case InitMode::Map: return "map";
  }
  return "default";
}

std::size_t InferenceConfig::resolved_burn_in() const {
  // burn / (burn + n) = 0.2
  return burn_in.value_or(n_samples / 4);
}

void InferenceConfig::validate() const {
  if (n_samples < 1) throw ConfigError("n_samples must be at least 1");
  if (!(step_size > 0.0)) throw ConfigError("step_size must be positive");
  if (leapfrog_steps < 1) throw ConfigError("leapfrog_steps must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must lie in [0, 1)");
  }
  if (ensemble_size < 1) throw ConfigError("ensemble_size must be at least 1");
  if (cycles < 1) throw ConfigError("cycles must be at least 1");
  if (method == Method::Sens && iterations < cycles) {
    throw ConfigError("snapshot ensembles need at least one iteration per cycle");
  }
}

void PosteriorSamples::append(std::span<const double> theta) {
  if (theta.size() != n_params) throw DimensionMismatch("sample row has the wrong length");
  for (double v : theta) {
    if (!std::isfinite(v)) throw NonFiniteValue("non-finite posterior sample");
  }
  values.insert(values.end(), theta.begin(), theta.end());
}

double cyclic_cosine_lr(double lr0, std::size_t t_in_cycle, std::size_t cycle_len) {
  const double frac = static_cast<double>(t_in_cycle) / static_cast<double>(cycle_len);
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * frac));
}

Adam::Adam(std::size_t n, double beta1, double beta2, double eps)
    : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::span<double> theta, std::span<const double> grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    theta[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

std::size_t worker_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("UQ_THREADS"); env != nullptr) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ParamVector initial_coords(const UqModel& model, std::mt19937_64& rng) {
  ParamVector theta;
  theta.reserve(model.param_count());
  for (const Process& p : model.processes()) {
    const VariableSpec& v = p.variable;
    ParamVector local;
    switch (v.init) {
      case InitStrategy::Zeros: local.assign(p.param_count(), 0.0); break;
      case InitStrategy::Constant: local.assign(p.param_count(), v.init_value); break;
      case InitStrategy::Default:
        if (v.family == Family::Variational && v.variational) {
          local = v.variational->mean;
        } else {
          local = initial_params(p.surrogate, rng);
        }
        break;
    }
    theta.insert(theta.end(), local.begin(), local.end());
  }
  return theta;
}

MaskSet dropout_masks(const UqModel& model, double rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MaskSet masks;
  for (const Process& p : model.processes()) {
    if (const auto* fnn = std::get_if<FnnSpec>(&p.surrogate)) {
      masks.emplace_back(sample_dropout_mask(*fnn, rate, rng));
    } else {
      masks.emplace_back(std::nullopt);
    }
  }
  return masks;
}

PosteriorSamples run_inference(const UqModel& model, const InferenceConfig& cfg) {
  switch (cfg.method) {
    case Method::Hmc: return hmc_run(model, cfg);
    case Method::Mala: return mala_run(model, cfg);
    case Method::Ld: return ld_run(model, cfg);
    case Method::Mfvi: return mfvi_run(model, cfg).samples;
    case Method::Mcd: return mcd_run(model, cfg);
    case Method::Dens: return dens_run(model, cfg);
    case Method::Sens: return sens_run(model, cfg);
    case Method::La: return la_run(model, cfg);
  }
  throw ConfigError("unhandled method");
}

}  // namespace uq
