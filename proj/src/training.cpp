// Variational and trainable-family methods: MFVI, MC dropout, deep and
// snapshot ensembles, Laplace approximation.

#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <iostream>
#include <numbers>
#include <thread>

#include "uq/inference.hpp"

namespace uq {

using ad::Var;

namespace {

void require_family(const UqModel& model, Family family, Method m) {
  model.validate();
  if (model.family() != family) {
    throw FamilyMismatch(fmt::format("{} needs {} processes, model is {}", method_name(m),
                                     family_name(family), family_name(model.family())));
  }
}

// Cosine decay from lr0 to lr0 * floor over the run.
double decayed_lr(double lr0, std::size_t it, std::size_t total, double floor = 0.01) {
  const double frac = total == 0 ? 0.0 : static_cast<double>(it) / static_cast<double>(total);
  return lr0 * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac)));
}

PosteriorSamples empty_samples(Method m, const InferenceConfig& cfg, std::size_t dim) {
  PosteriorSamples s;
  s.method = m;
  s.seed = cfg.seed;
  s.n_params = dim;
  return s;
}

// Plain Adam descent on the model loss; returns the final loss.
double train_mse(const UqModel& model, ParamVector& theta, const InferenceConfig& cfg) {
  Adam adam(theta.size());
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto vg = ad::grad(
        [&model](std::span<const Var> t) { return model.mse_loss<Var>(t); }, theta);
    adam.step(theta, vg.gradient, decayed_lr(cfg.learning_rate, it, cfg.iterations));
  }
  return model.mse_loss<double>(theta);
}

}  // namespace

// ---------------------------------------------------------------- MFVI

MfviResult mfvi_run(const UqModel& model, const InferenceConfig& cfg) {
  cfg.validate();
  require_family(model, Family::Variational, Method::Mfvi);
  const std::size_t n = model.param_count();

  std::vector<NormalPrior> priors;
  ParamVector state;  // [m ; rho]
  state.reserve(2 * n);
  for (const Process& p : model.processes()) {
    const auto* normal = std::get_if<NormalPrior>(&*p.variable.prior);
    if (normal == nullptr) throw FamilyMismatch("MFVI needs Normal priors ('" + p.key + "')");
    priors.push_back(*normal);
    state.insert(state.end(), p.variable.variational->mean.begin(),
                 p.variable.variational->mean.end());
  }
  for (const Process& p : model.processes()) {
    state.insert(state.end(), p.variable.variational->rho.begin(),
                 p.variable.variational->rho.end());
  }

  std::vector<std::size_t> offsets;
  for (const Process& p : model.processes()) offsets.push_back(model.offset(p.key));

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(n);

  auto neg_elbo = [&](std::span<const Var> s) {
    const auto m = s.first(n);
    const auto rho = s.subspan(n);
    const std::vector<Var> theta = reparameterize<Var>(m, rho, noise);
    Var kl(0.0);
    for (std::size_t i = 0; i < priors.size(); ++i) {
      const std::size_t len = model.processes()[i].param_count();
      kl = kl + kl_diag_normal<Var>(m.subspan(offsets[i], len), rho.subspan(offsets[i], len),
                                    priors[i]);
    }
    return kl - model.log_likelihood<Var>(theta);
  };

  MfviResult result;
  result.samples = empty_samples(Method::Mfvi, cfg, n);
  Adam adam(state.size());
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (double& z : noise) z = normal(rng);
    ad::ValueGrad vg;
    try {
      vg = ad::grad(neg_elbo, state);
    } catch (const NonFiniteValue& e) {
      throw DivergedElbo(fmt::format("iteration {}: {}", it, e.what()));
    }
    if (!std::isfinite(vg.value)) throw DivergedElbo(fmt::format("iteration {}", it));
    result.samples.trace.push_back(-vg.value);
    adam.step(state, vg.gradient, decayed_lr(cfg.learning_rate, it, cfg.iterations));
  }

  for (std::size_t i = 0; i < model.processes().size(); ++i) {
    const std::size_t len = model.processes()[i].param_count();
    VariationalParams q;
    q.mean.assign(state.begin() + offsets[i], state.begin() + offsets[i] + len);
    q.rho.assign(state.begin() + n + offsets[i], state.begin() + n + offsets[i] + len);
    result.posterior.push_back(std::move(q));
  }
  const std::span<const double> m(state.data(), n);
  const std::span<const double> rho(state.data() + n, n);
  for (std::size_t j = 0; j < cfg.n_samples; ++j) {
    for (double& z : noise) z = normal(rng);
    result.samples.append(reparameterize<double>(m, rho, noise));
  }
  return result;
}

// ---------------------------------------------------------------- MC dropout

PosteriorSamples mcd_run(const UqModel& model, const InferenceConfig& cfg) {
  cfg.validate();
  require_family(model, Family::Trainable, Method::Mcd);
  std::mt19937_64 rng(cfg.seed);
  ParamVector theta = initial_coords(model, rng);
  PosteriorSamples out = empty_samples(Method::Mcd, cfg, theta.size());
  out.dropout_rate = cfg.dropout_rate;

  Adam adam(theta.size());
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const MaskSet masks = dropout_masks(model, cfg.dropout_rate, rng());
    const auto vg = ad::grad(
        [&](std::span<const Var> t) { return model.mse_loss<Var>(t, &masks); }, theta);
    out.trace.push_back(vg.value);
    adam.step(theta, vg.gradient, decayed_lr(cfg.learning_rate, it, cfg.iterations));
  }
  for (std::size_t j = 0; j < cfg.n_samples; ++j) {
    out.append(theta);
    out.mask_seeds.push_back(rng());
  }
  return out;
}

// ---------------------------------------------------------------- ensembles

PosteriorSamples dens_run(const UqModel& model, const InferenceConfig& cfg) {
  cfg.validate();
  require_family(model, Family::Trainable, Method::Dens);
  const std::size_t members = cfg.ensemble_size;
  std::vector<std::optional<ParamVector>> results(members);
  std::vector<double> final_loss(members, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> failures(members);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < members; i = next++) {
      std::mt19937_64 rng(cfg.seed + i);
      ParamVector theta = initial_coords(model, rng);
      try {
        final_loss[i] = train_mse(model, theta, cfg);
        if (!std::isfinite(final_loss[i])) throw NonFiniteValue("final loss");
        results[i] = std::move(theta);
      } catch (const NonFiniteValue& e) {
        failures[i] = e.what();
      }
    }
  };
  const std::size_t n_workers = std::min(worker_count(cfg.threads), members);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  PosteriorSamples out = empty_samples(Method::Dens, cfg, model.param_count());
  for (std::size_t i = 0; i < members; ++i) {
    if (results[i]) {
      out.append(*results[i]);
      out.trace.push_back(final_loss[i]);
    } else {
      out.diverged_members.push_back(i);
      std::cerr << "warning: " << MemberDiverged(fmt::format("member {}: {}", i, failures[i])).what()
                << '\n';
    }
  }
  if (out.size() == 0) throw MemberDiverged("every ensemble member diverged");
  return out;
}

PosteriorSamples sens_run(const UqModel& model, const InferenceConfig& cfg) {
  cfg.validate();
  require_family(model, Family::Trainable, Method::Sens);
  std::mt19937_64 rng(cfg.seed);
  ParamVector theta = initial_coords(model, rng);
  PosteriorSamples out = empty_samples(Method::Sens, cfg, theta.size());
  const std::size_t cycle_len = cfg.iterations / cfg.cycles;
  Adam adam(theta.size());
  for (std::size_t c = 0; c < cfg.cycles; ++c) {
    for (std::size_t t = 0; t < cycle_len; ++t) {
      const auto vg = ad::grad(
          [&model](std::span<const Var> th) { return model.mse_loss<Var>(th); }, theta);
      out.trace.push_back(vg.value);
      adam.step(theta, vg.gradient, cyclic_cosine_lr(cfg.learning_rate, t, cycle_len));
    }
    out.append(theta);
  }
  return out;
}

// ---------------------------------------------------------------- Laplace

LaplaceResult la_fit(const UqModel& model, const InferenceConfig& cfg) {
  cfg.validate();
  require_family(model, Family::Trainable, Method::La);
  const double prec = cfg.prior_precision;
  std::mt19937_64 rng(cfg.seed);
  ParamVector theta = initial_coords(model, rng);

  LaplaceResult result;
  result.samples = empty_samples(Method::La, cfg, theta.size());
  auto neg_log_post = [&model, prec](std::span<const Var> t) {
    return 0.5 * prec * ad::dot(t, t) - model.log_likelihood<Var>(t);
  };
  Adam adam(theta.size());
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto vg = ad::grad(neg_log_post, theta);
    result.samples.trace.push_back(vg.value);
    adam.step(theta, vg.gradient, decayed_lr(cfg.learning_rate, it, cfg.iterations, 1e-3));
  }

  // Diagonal generalized Gauss-Newton: sum over observations of
  // (d r_i / d theta)^2 with r_i the standardized residual.
  const auto jac = ad::jacobian(
      [&model](std::span<const Var> t) { return model.standardized_residuals<Var>(t); }, theta);
  ParamVector h(theta.size(), prec);
  for (const auto& row : jac) {
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += row[i] * row[i];
  }
  std::size_t clamped = 0;
  for (double& v : h) {
    if (!(v > 0.0)) {
      v = prec > 0.0 ? prec : 1.0;
      ++clamped;
    }
  }
  if (clamped > 0) {
    std::cerr << "warning: "
              << NonPositiveCurvature(fmt::format("{} curvature entries clamped", clamped)).what()
              << '\n';
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> draw(theta.size());
  for (std::size_t j = 0; j < cfg.n_samples; ++j) {
    for (std::size_t i = 0; i < draw.size(); ++i) draw[i] = theta[i] + normal(rng) / std::sqrt(h[i]);
    result.samples.append(draw);
  }
  result.mode = std::move(theta);
  result.precision = std::move(h);
  return result;
}

PosteriorSamples la_run(const UqModel& model, const InferenceConfig& cfg) {
  return la_fit(model, cfg).samples;
}

}  // namespace uq
