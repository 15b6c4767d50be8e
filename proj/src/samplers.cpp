// Gradient-based MCMC over the unnormalized log posterior.

#include <fmt/format.h>

#include <cmath>
#include <iostream>

#include "uq/inference.hpp"

namespace uq {

namespace {

double dot(std::span<const double> a, std::span<const double> b) { return ad::dot(a, b); }

// Leapfrog that reuses the gradient at the start point. On success
// position, momentum, grad and logp describe the end point. Returns false
// if the trajectory leaves the support or hits a non-finite value.
bool leapfrog_inplace(const LogDensityFn& logp_fn, std::vector<double>& position,
                      std::vector<double>& momentum, std::vector<double>& grad, double& logp,
                      double step_size, int steps) {
  const std::size_t n = position.size();
  for (std::size_t i = 0; i < n; ++i) momentum[i] += 0.5 * step_size * grad[i];
  for (int l = 0; l < steps; ++l) {
    for (std::size_t i = 0; i < n; ++i) position[i] += step_size * momentum[i];
    logp = logp_fn(position, grad);
    if (!std::isfinite(logp)) return false;
    const double kick = l + 1 == steps ? 0.5 * step_size : step_size;
    for (std::size_t i = 0; i < n; ++i) momentum[i] += kick * grad[i];
  }
  return true;
}

void require_finite_start(double logp) {
  if (!std::isfinite(logp)) {
    throw InferenceError("initial point has zero posterior density");
  }
}

void check_acceptance(const PosteriorSamples& s) {
  if (s.acceptance_rate < 0.01) {
    throw ZeroAcceptance(fmt::format("{} acceptance rate {:.4f} after burn-in; reduce step_size",
                                     method_name(s.method), s.acceptance_rate));
  }
}

void require_family(const UqModel& model, Family family, Method m) {
  model.validate();
  if (model.family() != family) {
    throw FamilyMismatch(fmt::format("{} needs {} processes, model is {}", method_name(m),
                                     family_name(family), family_name(model.family())));
  }
}

ParamVector prior_draw(const UqModel& model, std::mt19937_64& rng) {
  ParamVector theta;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const Process& p : model.processes()) {
    const Prior prior = p.variable.prior.value_or(NormalPrior{});
    for (std::size_t i = 0; i < p.param_count(); ++i) {
      const double z = normal(rng);
      std::visit(
          [&](const auto& pr) {
            using P = std::decay_t<decltype(pr)>;
            if constexpr (std::is_same_v<P, HalfNormalPrior>) {
              theta.push_back(std::abs(z) * pr.std);
            } else {
              theta.push_back(pr.mean + pr.std * z);
            }
          },
          prior);
    }
  }
  return theta;
}

// Starting point for the samplers.
ParamVector sampler_start(const UqModel& model, const InferenceConfig& cfg) {
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  if (cfg.init == InitMode::Prior) return prior_draw(model, rng);
  ParamVector theta = initial_coords(model, rng);
  if (cfg.init == InitMode::Map) {
    const LogDensity target = posterior_density(model);
    Adam adam(theta.size());
    std::vector<double> grad(theta.size());
    std::vector<double> neg(theta.size());
    for (std::size_t it = 0; it < cfg.init_iterations; ++it) {
      const double lp = target.eval(theta, grad);
      if (!std::isfinite(lp)) throw InferenceError("MAP initialization left the support");
      for (std::size_t i = 0; i < grad.size(); ++i) neg[i] = -grad[i];
      const double frac = static_cast<double>(it) / static_cast<double>(cfg.init_iterations);
      adam.step(theta, neg, cfg.init_learning_rate * (0.1 + 0.9 * (1.0 - frac)));
    }
  }
  return theta;
}

PosteriorSamples empty_samples(Method m, const InferenceConfig& cfg, std::size_t dim) {
  PosteriorSamples s;
  s.method = m;
  s.seed = cfg.seed;
  s.n_params = dim;
  s.values.reserve(cfg.n_samples * dim);
  return s;
}

}  // namespace

LogDensity posterior_density(const UqModel& model) {
  LogDensity d;
  d.dim = model.param_count();
  d.eval = [&model](std::span<const double> theta, std::span<double> grad) {
    const double lp = model.log_prior<double>(theta);
    if (!std::isfinite(lp)) {
      std::fill(grad.begin(), grad.end(), 0.0);
      return kLogZero;
    }
    try {
      const auto vg = ad::grad(
          [&model](std::span<const ad::Var> t) { return model.log_posterior<ad::Var>(t); }, theta);
      std::copy(vg.gradient.begin(), vg.gradient.end(), grad.begin());
      return vg.value;
    } catch (const NonFiniteValue&) {
      std::fill(grad.begin(), grad.end(), 0.0);
      return kLogZero;
    }
  };
  return d;
}

PhasePoint leapfrog(const LogDensityFn& logp, std::span<const double> position,
                    std::span<const double> momentum, double step_size, int steps) {
  if (!(step_size > 0.0) || steps < 1) throw ConfigError("leapfrog needs step_size > 0, L >= 1");
  PhasePoint out{ParamVector(position.begin(), position.end()),
                 ParamVector(momentum.begin(), momentum.end())};
  std::vector<double> grad(position.size());
  double lp = logp(out.position, grad);
  if (!std::isfinite(lp) ||
      !leapfrog_inplace(logp, out.position, out.momentum, grad, lp, step_size, steps)) {
    throw NonFiniteValue("leapfrog trajectory left the support");
  }
  return out;
}

PosteriorSamples hmc_sample(const LogDensity& target, ParamVector theta,
                            const InferenceConfig& cfg) {
  cfg.validate();
  const std::size_t n = theta.size();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<double> grad(n);
  double logp = target.eval(theta, grad);
  require_finite_start(logp);

  PosteriorSamples out = empty_samples(Method::Hmc, cfg, n);
  const std::size_t burn = cfg.resolved_burn_in();
  std::size_t accepted = 0;
  std::vector<double> p(n), pos(n), mom(n), g(n);
  for (std::size_t it = 0; it < burn + cfg.n_samples; ++it) {
    for (double& v : p) v = normal(rng);
    const double h0 = -logp + 0.5 * dot(p, p);
    pos = theta;
    mom = p;
    g = grad;
    double lp_new = logp;
    const bool ok = leapfrog_inplace(target.eval, pos, mom, g, lp_new, cfg.step_size,
                                     cfg.leapfrog_steps);
    const double u = uniform(rng);
    bool accept = false;
    if (ok) {
      const double h1 = -lp_new + 0.5 * dot(mom, mom);
      accept = std::isfinite(h1) && std::log(u) < h0 - h1;
    }
    if (accept) {
      theta.swap(pos);
      grad.swap(g);
      logp = lp_new;
    }
    if (it >= burn) {
      accepted += accept ? 1 : 0;
      out.append(theta);
      out.trace.push_back(logp);
    }
  }
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.n_samples);
  check_acceptance(out);
  return out;
}

PosteriorSamples mala_sample(const LogDensity& target, ParamVector theta,
                             const InferenceConfig& cfg) {
  cfg.validate();
  const std::size_t n = theta.size();
  const double eps = cfg.step_size;
  const double half_eps2 = 0.5 * eps * eps;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<double> grad(n);
  double logp = target.eval(theta, grad);
  require_finite_start(logp);

  PosteriorSamples out = empty_samples(Method::Mala, cfg, n);
  const std::size_t burn = cfg.resolved_burn_in();
  std::size_t accepted = 0;
  std::vector<double> prop(n), gprop(n);
  for (std::size_t it = 0; it < burn + cfg.n_samples; ++it) {
    double fwd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = normal(rng);
      prop[i] = theta[i] + half_eps2 * grad[i] + eps * z;
      fwd += z * z;
    }
    // log q(prop | theta) = -|prop - theta - eps^2/2 grad|^2 / (2 eps^2) = -|z|^2 / 2
    const double log_q_fwd = -0.5 * fwd;
    const double lp_prop = target.eval(prop, gprop);
    const double u = uniform(rng);
    bool accept = false;
    if (std::isfinite(lp_prop)) {
      double bwd = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = theta[i] - prop[i] - half_eps2 * gprop[i];
        bwd += d * d;
      }
      const double log_q_bwd = -bwd / (2.0 * eps * eps);
      const double log_alpha = lp_prop - logp + log_q_bwd - log_q_fwd;
      accept = std::log(u) < log_alpha;
    }
    if (accept) {
      theta.swap(prop);
      grad.swap(gprop);
      logp = lp_prop;
    }
    if (it >= burn) {
      accepted += accept ? 1 : 0;
      out.append(theta);
      out.trace.push_back(logp);
    }
  }
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.n_samples);
  check_acceptance(out);
  return out;
}

PosteriorSamples ld_sample(const LogDensity& target, ParamVector theta,
                           const InferenceConfig& cfg) {
  cfg.validate();
  const std::size_t n = theta.size();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> grad(n);
  double logp = target.eval(theta, grad);
  require_finite_start(logp);

  PosteriorSamples out = empty_samples(Method::Ld, cfg, n);
  const std::size_t burn = cfg.resolved_burn_in();
  std::size_t moved = 0;
  std::vector<double> pos(n), mom(n), g(n);
  for (std::size_t it = 0; it < burn + cfg.n_samples; ++it) {
    for (double& v : mom) v = normal(rng);
    pos = theta;
    g = grad;
    double lp_new = logp;
    // no Metropolis correction: every finite step is kept
    if (leapfrog_inplace(target.eval, pos, mom, g, lp_new, cfg.step_size, 1)) {
      theta.swap(pos);
      grad.swap(g);
      logp = lp_new;
      if (it >= burn) ++moved;
    }
    if (it >= burn) {
      out.append(theta);
      out.trace.push_back(logp);
    }
  }
  out.acceptance_rate = static_cast<double>(moved) / static_cast<double>(cfg.n_samples);
  return out;
}

PosteriorSamples hmc_run(const UqModel& model, const InferenceConfig& cfg) {
  require_family(model, Family::Samplable, Method::Hmc);
  return hmc_sample(posterior_density(model), sampler_start(model, cfg), cfg);
}

PosteriorSamples mala_run(const UqModel& model, const InferenceConfig& cfg) {
  require_family(model, Family::Samplable, Method::Mala);
  return mala_sample(posterior_density(model), sampler_start(model, cfg), cfg);
}

PosteriorSamples ld_run(const UqModel& model, const InferenceConfig& cfg) {
  require_family(model, Family::Samplable, Method::Ld);
  return ld_sample(posterior_density(model), sampler_start(model, cfg), cfg);
}

}  // namespace uq
