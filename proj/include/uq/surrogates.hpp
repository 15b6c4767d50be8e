#pragma once

// Parameterized function families u_theta(x).
//
// Every surrogate reads its parameters from a flat span. The layout of a
// fully-connected net is fixed: for each layer in order, the weight matrix
// row-major (out x in) followed by the bias vector. A DeepONet stores its
// branch parameters first, then its trunk parameters.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "uq/autodiff.hpp"
#include "uq/jet.hpp"

namespace uq {

using ParamVector = std::vector<double>;

enum class Activation { Tanh, Sin, Softplus };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

struct FnnSpec {
  std::vector<int> widths;  // input, hidden..., output
  Activation activation = Activation::Tanh;
  // Optional fixed map of input coordinate i from [lo, hi] onto [-1, 1].
  std::vector<std::pair<double, double>> input_range;

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  std::size_t param_count() const;
  void validate() const;
};

// Unknown constant: output is the parameter vector itself.
struct IdentitySpec {
  int dim = 1;
};

// Input layout for evaluation through the generic interface is
// [sensor values..., query coordinates...].
struct DeepONetSpec {
  FnnSpec branch;
  FnnSpec trunk;

  int latent_width() const { return branch.output_dim(); }
  std::size_t param_count() const { return branch.param_count() + trunk.param_count(); }
  void validate() const;
};

// Fixed-weight functional prior. The latent vector is the only parameter.
//   Basis mode: network maps x -> (phi_1..phi_L), g(z, x) = sum_k z_k phi_k(x).
//   Joint mode: network maps (z, x) -> g, with a single output.
struct GeneratorSpec {
  enum class Mode { Basis, Joint };

  FnnSpec network;
  std::shared_ptr<const std::vector<double>> frozen_weights;
  int latent_dim = 0;
  int query_dim = 1;
  Mode mode = Mode::Basis;
};

GeneratorSpec load_generator(const std::filesystem::path& path, int query_dim = 1);

// Weights CSV: header "# fnn <w0,w1,...> <activation>", then one value per line.
void write_fnn_weights(const std::filesystem::path& path, const FnnSpec& spec,
                       std::span<const double> weights);
std::pair<FnnSpec, std::vector<double>> read_fnn_weights(const std::filesystem::path& path);

// User-defined surrogate. Both evaluators receive parameters and input jets
// and must return one jet per output; make_custom builds them from a single
// generic callable.
struct CustomSpec {
  std::string name;
  std::size_t n_params = 0;
  int in_dim = 1;
  int out_dim = 1;
  std::function<std::vector<Jet<double>>(std::span<const double>, std::span<const Jet<double>>)>
      eval_double;
  std::function<std::vector<Jet<ad::Var>>(std::span<const ad::Var>,
                                          std::span<const Jet<ad::Var>>)>
      eval_var;
};

template <class F>
CustomSpec make_custom(std::string name, std::size_t n_params, int in_dim, int out_dim, F fn) {
  CustomSpec spec;
  spec.name = std::move(name);
  spec.n_params = n_params;
  spec.in_dim = in_dim;
  spec.out_dim = out_dim;
  spec.eval_double = [fn](std::span<const double> p, std::span<const Jet<double>> x) {
    return fn(p, x);
  };
  spec.eval_var = [fn](std::span<const ad::Var> p, std::span<const Jet<ad::Var>> x) {
    return fn(p, x);
  };
  return spec;
}

using Surrogate = std::variant<FnnSpec, IdentitySpec, DeepONetSpec, GeneratorSpec, CustomSpec>;

std::size_t param_count(const Surrogate& s);
int input_dim(const Surrogate& s);
int output_dim(const Surrogate& s);
std::string surrogate_kind(const Surrogate& s);

// Per hidden layer, per unit multiplier applied after the activation
// (0 for a dropped unit, 1/(1-rate) for a kept one).
struct DropoutMask {
  std::vector<std::vector<double>> hidden;
};

DropoutMask sample_dropout_mask(const FnnSpec& spec, double rate, std::mt19937_64& rng);

// One jet per output component along input coordinate `axis`. order 0
// yields plain values.
template <class T>
std::vector<Jet<T>> surrogate_eval_jets(const Surrogate& s, std::span<const T> params,
                                        std::span<const double> x, std::size_t axis, int order,
                                        const DropoutMask* mask = nullptr);

template <class T>
std::vector<T> surrogate_eval(const Surrogate& s, std::span<const T> params,
                              std::span<const double> x, const DropoutMask* mask = nullptr);

template <class T>
std::vector<Jet<T>> fnn_forward(const FnnSpec& spec, std::span<const T> params,
                                std::span<const Jet<T>> inputs, const DropoutMask* mask = nullptr);

// Plain forward pass with double inputs (no jets), the fast path used by
// operator learning.
template <class T>
std::vector<T> fnn_values(const FnnSpec& spec, std::span<const T> params,
                          std::span<const double> inputs);

template <class T>
T deeponet_eval(const DeepONetSpec& spec, std::span<const T> params,
                std::span<const double> sensors, std::span<const double> x);

template <class T>
T generator_eval(const GeneratorSpec& spec, std::span<const T> latent, std::span<const double> x);

// Layer-structured view of a flat FNN parameter vector.
struct FnnLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;
};

std::vector<FnnLayer> unpack_fnn(const FnnSpec& spec, std::span<const double> params);
ParamVector pack_fnn(const FnnSpec& spec, const std::vector<FnnLayer>& layers);

// Seeded initialization: Glorot-uniform for tanh nets, fan-in scaled normal
// otherwise, zero biases; identities start at zero, generators at the
// latent prior mean (zero).
ParamVector initial_params(const Surrogate& s, std::mt19937_64& rng);

}  // namespace uq
