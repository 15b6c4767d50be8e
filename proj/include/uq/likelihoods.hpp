#pragma once

// Datasets, physics residuals, and the model that combines processes with
// likelihood terms into a log posterior (Bayesian families) or a weighted
// MSE loss (trainable family).

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "uq/processes.hpp"

namespace uq {

enum class DataTag { U, F, B, Lambda };

std::string_view tag_name(DataTag t);

struct Dataset {
  std::size_t dx = 1;
  std::size_t du = 1;
  std::vector<double> inputs;     // N x dx, row-major
  std::vector<double> targets;    // N x du, row-major
  std::vector<double> noise_std;  // du entries
  DataTag tag = DataTag::U;

  std::size_t size() const { return dx == 0 ? targets.size() / du : inputs.size() / dx; }
  std::span<const double> input(std::size_t i) const { return {inputs.data() + i * dx, dx}; }
  std::span<const double> target(std::size_t i) const { return {targets.data() + i * du, du}; }

  // Row alignment always; positive noise when bayesian.
  void validate(bool bayesian) const;
};

// Operator-learning data: N input functions sampled at shared sensors, the
// outputs at shared locations.
struct OperatorDataset {
  std::vector<double> sensor_locations;          // N_lambda
  std::vector<std::vector<double>> sensor_values;  // N x N_lambda
  std::vector<double> locations;                   // N_u (1-d queries)
  std::vector<std::vector<double>> targets;        // N x N_u

  std::size_t n_functions() const { return sensor_values.size(); }
  void validate() const;
};

template <class T>
class ResidualContext {
 public:
  using JetLookup = std::function<const std::vector<Jet<T>>&(std::string_view, std::size_t)>;

  ResidualContext(std::span<const double> x, JetLookup lookup)
      : x_(x), lookup_(std::move(lookup)) {}

  std::span<const double> x() const { return x_; }

  // Jets (one per surrogate output) of process `key` along input axis.
  const std::vector<Jet<T>>& jets(std::string_view key, std::size_t axis = 0) const {
    return lookup_(key, axis);
  }

 private:
  std::span<const double> x_;
  JetLookup lookup_;
};

// A residual operator F[u](x). Declares which processes it reads, along
// which input axes, and to which derivative order.
struct ResidualFn {
  std::vector<std::string> reads;
  std::vector<std::size_t> axes{0};
  int order = 1;
  std::size_t out_dim = 1;
  std::function<std::vector<double>(const ResidualContext<double>&)> eval_double;
  std::function<std::vector<ad::Var>(const ResidualContext<ad::Var>&)> eval_var;
};

template <class F>
ResidualFn make_residual(std::vector<std::string> reads, std::vector<std::size_t> axes, int order,
                         std::size_t out_dim, F fn) {
  check_jet_order(order);
  ResidualFn r;
  r.reads = std::move(reads);
  r.axes = std::move(axes);
  r.order = order;
  r.out_dim = out_dim;
  r.eval_double = [fn](const ResidualContext<double>& c) { return fn(c); };
  r.eval_var = [fn](const ResidualContext<ad::Var>& c) { return fn(c); };
  return r;
}

// Surrogate output compared directly with data. `components` maps target
// column j to surrogate output components[j]; empty means identity.
struct DirectTerm {
  std::string key;
  Dataset data;
  std::vector<int> components;
};

struct ResidualTerm {
  ResidualFn fn;
  Dataset data;
};

struct OperatorTerm {
  std::string key;
  OperatorDataset data;
  double noise_std = 1.0;
};

using LikelihoodTerm = std::variant<DirectTerm, ResidualTerm, OperatorTerm>;

struct LossWeights {
  double u = 1.0;
  double f = 1.0;
  double b = 1.0;
  double lambda = 1.0;

  double of(DataTag t) const;
};

// Per-process dropout masks (nullopt: no dropout on that process).
using MaskSet = std::vector<std::optional<DropoutMask>>;

class UqModel {
 public:
  void add_process(Process p);
  void add_term(LikelihoodTerm term);
  void set_loss_weights(LossWeights w) { weights_ = w; }

  const std::vector<Process>& processes() const { return processes_; }
  const std::vector<LikelihoodTerm>& terms() const { return terms_; }
  const LossWeights& loss_weights() const { return weights_; }
  Family family() const;

  std::size_t param_count() const { return total_params_; }
  std::size_t offset(std::string_view key) const;
  std::size_t index_of(std::string_view key) const;
  const Process& process(std::string_view key) const;

  // Every referenced key exists and the processes share one family.
  void validate() const;

  template <class T>
  T log_prior(std::span<const T> theta) const;

  template <class T>
  T log_likelihood(std::span<const T> theta, const MaskSet* masks = nullptr) const;

  template <class T>
  T log_posterior(std::span<const T> theta) const;

  template <class T>
  T mse_loss(std::span<const T> theta, const MaskSet* masks = nullptr) const;

  // (prediction - target) / sigma for every observed scalar, in term order.
  template <class T>
  std::vector<T> standardized_residuals(std::span<const T> theta,
                                        const MaskSet* masks = nullptr) const;

  // Surrogate outputs of one process at x, taking sampler coordinates.
  template <class T>
  std::vector<T> predict(std::string_view key, std::span<const T> theta,
                         std::span<const double> x, const MaskSet* masks = nullptr) const;

  template <class T>
  std::vector<T> process_params(std::size_t index, std::span<const T> theta) const;

 private:
  enum class Scaling { Bayesian, Mse };

  template <class T>
  void residual_rows(std::span<const T> theta, const MaskSet* masks, Scaling scaling,
                     std::vector<T>& rows) const;

  std::vector<Process> processes_;
  std::vector<std::size_t> offsets_;
  std::vector<LikelihoodTerm> terms_;
  LossWeights weights_;
  std::size_t total_params_ = 0;
};

// Sum over points and components of the Gaussian log density.
double normal_loglik(const Dataset& ds, std::span<const double> predictions);

// Residual values at each point (N x out_dim, row-major).
template <class T>
std::vector<T> residual_eval(const ResidualFn& fn, const UqModel& model, std::span<const T> theta,
                             std::span<const double> points, std::size_t dx);

// (1 / (N N_u)) sum_i sum_j (G(lambda_i)(x_j) - u_ij)^2.
template <class T>
T deeponet_mse(const OperatorDataset& data, const DeepONetSpec& spec, std::span<const T> theta);

// Predictions G(lambda_i)(x_j), N x N_u.
std::vector<std::vector<double>> deeponet_predict(const OperatorDataset& data,
                                                  const DeepONetSpec& spec,
                                                  std::span<const double> theta);

}  // namespace uq
