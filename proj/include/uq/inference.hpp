#pragma once

// Posterior approximation: MCMC samplers (HMC, MALA, LD), mean-field
// variational inference, and the trainable-family methods (MC dropout,
// deep and snapshot ensembles, Laplace approximation).

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "uq/likelihoods.hpp"

namespace uq {

enum class Method { Hmc, Mala, Ld, Mfvi, Mcd, Dens, Sens, La };

Method parse_method(std::string_view name);
std::string_view method_name(Method m);
const std::vector<Method>& all_methods();

// Parameter treatment each method expects from the model's processes.
Family method_family(Method m);

enum class InitMode { Default, Prior, Map };

InitMode parse_init_mode(std::string_view name);
std::string_view init_mode_name(InitMode m);

struct InferenceConfig {
  Method method = Method::Hmc;
  std::size_t n_samples = 1000;
  std::optional<std::size_t> burn_in;  // default: 20% of all iterations
  double step_size = 0.01;
  int leapfrog_steps = 30;
  double learning_rate = 1e-3;
  std::size_t iterations = 5000;
  std::size_t ensemble_size = 5;
  double dropout_rate = 0.05;
  std::size_t cycles = 5;
  double prior_precision = 1.0;  // Laplace
  InitMode init = InitMode::Default;
  std::size_t init_iterations = 2000;
  double init_learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: UQ_THREADS, else hardware concurrency

  std::size_t resolved_burn_in() const;
  void validate() const;
};

struct PosteriorSamples {
  Method method = Method::Hmc;
  std::uint64_t seed = 0;
  std::size_t n_params = 0;
  std::vector<double> values;  // M x P, row-major, sampler coordinates
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> trace;   // log posterior, loss, or ELBO per iteration
  // MC dropout: row j is evaluated under the mask drawn from mask_seeds[j].
  double dropout_rate = 0.0;
  std::vector<std::uint64_t> mask_seeds;
  std::vector<std::size_t> diverged_members;

  std::size_t size() const { return n_params == 0 ? 0 : values.size() / n_params; }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * n_params, n_params};
  }
  void append(std::span<const double> theta);
};

// Log density and its gradient; writes the gradient into `grad` and returns
// the value. May return kLogZero outside the support.
using LogDensityFn = std::function<double(std::span<const double>, std::span<double>)>;

struct LogDensity {
  std::size_t dim = 0;
  LogDensityFn eval;
};

LogDensity posterior_density(const UqModel& model);

struct PhasePoint {
  ParamVector position;
  ParamVector momentum;
};

// L steps of half-kick / drift / half-kick with identity mass.
PhasePoint leapfrog(const LogDensityFn& logp, std::span<const double> position,
                    std::span<const double> momentum, double step_size, int steps);

PosteriorSamples hmc_sample(const LogDensity& target, ParamVector init, const InferenceConfig& cfg);
PosteriorSamples mala_sample(const LogDensity& target, ParamVector init,
                             const InferenceConfig& cfg);
PosteriorSamples ld_sample(const LogDensity& target, ParamVector init, const InferenceConfig& cfg);

PosteriorSamples hmc_run(const UqModel& model, const InferenceConfig& cfg);
PosteriorSamples mala_run(const UqModel& model, const InferenceConfig& cfg);
PosteriorSamples ld_run(const UqModel& model, const InferenceConfig& cfg);

struct MfviResult {
  std::vector<VariationalParams> posterior;  // one per process
  PosteriorSamples samples;
};

MfviResult mfvi_run(const UqModel& model, const InferenceConfig& cfg);

PosteriorSamples mcd_run(const UqModel& model, const InferenceConfig& cfg);
PosteriorSamples dens_run(const UqModel& model, const InferenceConfig& cfg);
PosteriorSamples sens_run(const UqModel& model, const InferenceConfig& cfg);

struct LaplaceResult {
  ParamVector mode;
  ParamVector precision;  // diagonal of H
  PosteriorSamples samples;
};

LaplaceResult la_fit(const UqModel& model, const InferenceConfig& cfg);
PosteriorSamples la_run(const UqModel& model, const InferenceConfig& cfg);

// Dispatch on cfg.method.
PosteriorSamples run_inference(const UqModel& model, const InferenceConfig& cfg);

// Masks for one MC-dropout function sample (dropout on every FNN process).
MaskSet dropout_masks(const UqModel& model, double rate, std::uint64_t seed);

// Starting point in sampler coordinates, following each process's init
// strategy.
ParamVector initial_coords(const UqModel& model, std::mt19937_64& rng);

// lr0 / 2 * (1 + cos(pi * t / cycle_len)).
double cyclic_cosine_lr(double lr0, std::size_t t_in_cycle, std::size_t cycle_len);

class Adam {
 public:
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  // Descent step on theta given the gradient of the objective.
  void step(std::span<double> theta, std::span<const double> grad, double lr);

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  double beta1_;
  double beta2_;
  double eps_;
  std::size_t t_ = 0;
};

std::size_t worker_count(std::size_t requested);

}  // namespace uq
