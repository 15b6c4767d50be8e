#include "uq/surrogates.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace uq {

using ad::Var;

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "sin") return Activation::Sin;
  if (name == "softplus") return Activation::Softplus;
  throw UnregisteredOp("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Sin: return "sin";
    case Activation::Softplus: return "softplus";
  }
  return "tanh";
}

std::size_t FnnSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    n += static_cast<std::size_t>(widths[i]) * widths[i + 1] + widths[i + 1];
  }
  return n;
}

void FnnSpec::validate() const {
  if (widths.size() < 2) throw ShapeMismatch("an FNN needs at least input and output layers");
  for (int w : widths) {
    if (w < 1) throw ShapeMismatch("FNN layer widths must be positive");
  }
  if (!input_range.empty() && input_range.size() != static_cast<std::size_t>(input_dim())) {
    throw ShapeMismatch("input_range must have one entry per input");
  }
  for (const auto& [lo, hi] : input_range) {
    if (!(hi > lo)) throw ShapeMismatch("input_range needs hi > lo");
  }
}

void DeepONetSpec::validate() const {
  branch.validate();
  trunk.validate();
  if (branch.output_dim() != trunk.output_dim()) {
    throw ShapeMismatch(fmt::format("branch width {} != trunk width {}", branch.output_dim(),
                                    trunk.output_dim()));
  }
}

std::size_t param_count(const Surrogate& s) {
  return std::visit(
      [](const auto& spec) -> std::size_t {
        using S = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<S, FnnSpec> || std::is_same_v<S, DeepONetSpec>) {
          return spec.param_count();
        } else if constexpr (std::is_same_v<S, IdentitySpec>) {
          return static_cast<std::size_t>(spec.dim);
        } else if constexpr (std::is_same_v<S, GeneratorSpec>) {
          return static_cast<std::size_t>(spec.latent_dim);
        } else {
          return spec.n_params;
        }
      },
      s);
}

int input_dim(const Surrogate& s) {
  return std::visit(
      [](const auto& spec) -> int {
        using S = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<S, FnnSpec>) {
          return spec.input_dim();
        } else if constexpr (std::is_same_v<S, IdentitySpec>) {
          return 0;
        } else if constexpr (std::is_same_v<S, DeepONetSpec>) {
          return spec.branch.input_dim() + spec.trunk.input_dim();
        } else if constexpr (std::is_same_v<S, GeneratorSpec>) {
          return spec.query_dim;
        } else {
          return spec.in_dim;
        }
      },
      s);
}

int output_dim(const Surrogate& s) {
  return std::visit(
      [](const auto& spec) -> int {
        using S = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<S, FnnSpec>) {
          return spec.output_dim();
        } else if constexpr (std::is_same_v<S, IdentitySpec>) {
          return spec.dim;
        } else if constexpr (std::is_same_v<S, CustomSpec>) {
          return spec.out_dim;
        } else {
          return 1;
        }
      },
      s);
}

std::string surrogate_kind(const Surrogate& s) {
  switch (s.index()) {
    case 0: return "fnn";
    case 1: return "identity";
    case 2: return "deeponet";
    case 3: return "generator";
    default: return std::get<CustomSpec>(s).name;
  }
}

DropoutMask sample_dropout_mask(const FnnSpec& spec, double rate, std::mt19937_64& rng) {
  DropoutMask mask;
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t l = 1; l + 1 < spec.widths.size(); ++l) {
    std::vector<double> layer(spec.widths[l]);
    for (double& m : layer) m = keep(rng) ? scale : 0.0;
    mask.hidden.push_back(std::move(layer));
  }
  return mask;
}

namespace {

template <class T>
T activate(Activation a, const T& x) {
  using std::sin;
  using std::tanh;
  switch (a) {
    case Activation::Tanh: return tanh(x);
    case Activation::Sin: return sin(x);
    case Activation::Softplus: return ad::softplus(x);
  }
  return x;
}

template <class T>
Jet<T> activate(Activation a, const Jet<T>& x) {
  switch (a) {
    case Activation::Tanh: return tanh(x);
    case Activation::Sin: return sin(x);
    case Activation::Softplus: return softplus(x);
  }
  return x;
}

void check_params(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw DimensionMismatch(fmt::format("{} expects {} parameters, got {}", what, expected, got));
  }
}

void check_mask(const FnnSpec& spec, const DropoutMask* mask) {
  if (mask == nullptr) return;
  if (mask->hidden.size() + 2 != spec.widths.size()) {
    throw DimensionMismatch("dropout mask does not match the hidden layers");
  }
  for (std::size_t l = 0; l < mask->hidden.size(); ++l) {
    if (mask->hidden[l].size() != static_cast<std::size_t>(spec.widths[l + 1])) {
      throw DimensionMismatch("dropout mask layer width mismatch");
    }
  }
}

}  // namespace

template <class T>
std::vector<Jet<T>> fnn_forward(const FnnSpec& spec, std::span<const T> params,
                                std::span<const Jet<T>> inputs, const DropoutMask* mask) {
  check_params(spec.param_count(), params.size(), "fnn");
  if (inputs.size() != static_cast<std::size_t>(spec.input_dim())) {
    throw DimensionMismatch(
        fmt::format("fnn expects {} inputs, got {}", spec.input_dim(), inputs.size()));
  }
  check_mask(spec, mask);

  int order = 0;
  for (const auto& j : inputs) order = std::max(order, j.order());

  // Structure-of-arrays activations: h[k][unit] is the k-th derivative.
  std::array<std::vector<T>, 4> h;
  for (int k = 0; k <= order; ++k) h[k].assign(inputs.size(), T(0.0));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Jet<T> xi = inputs[i];
    if (!spec.input_range.empty()) {
      const auto [lo, hi] = spec.input_range[i];
      xi = (xi - T(0.5 * (lo + hi))) * T(2.0 / (hi - lo));
    }
    for (int k = 0; k <= xi.order(); ++k) h[k][i] = xi[k];
  }

  const std::size_t n_layers = spec.widths.size() - 1;
  std::size_t offset = 0;
  std::array<std::vector<T>, 4> z;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t in = spec.widths[l];
    const std::size_t out = spec.widths[l + 1];
    const auto w = params.subspan(offset, in * out);
    const auto b = params.subspan(offset + in * out, out);
    offset += in * out + out;
    for (int k = 0; k <= order; ++k) {
      z[k].resize(out);
      const std::span<const T> hk(h[k]);
      for (std::size_t i = 0; i < out; ++i) {
        z[k][i] = ad::dot(w.subspan(i * in, in), hk);
        if (k == 0) z[k][i] = z[k][i] + b[i];
      }
    }
    if (l + 1 == n_layers) break;
    for (int k = 0; k <= order; ++k) h[k].resize(out);
    for (std::size_t i = 0; i < out; ++i) {
      const double m = mask != nullptr ? mask->hidden[l][i] : 1.0;
      if (m == 0.0) {
        for (int k = 0; k <= order; ++k) h[k][i] = T(0.0);
        continue;
      }
      Jet<T> unit(z[0][i], order);
      for (int k = 1; k <= order; ++k) unit[k] = z[k][i];
      unit = activate(spec.activation, unit);
      for (int k = 0; k <= order; ++k) h[k][i] = m == 1.0 ? unit[k] : unit[k] * T(m);
    }
  }

  std::vector<Jet<T>> result;
  result.reserve(spec.output_dim());
  for (int i = 0; i < spec.output_dim(); ++i) {
    Jet<T> o(z[0][i], order);
    for (int k = 1; k <= order; ++k) o[k] = z[k][i];
    result.push_back(o);
  }
  return result;
}

template <class T>
std::vector<T> fnn_values(const FnnSpec& spec, std::span<const T> params,
                          std::span<const double> inputs) {
  check_params(spec.param_count(), params.size(), "fnn");
  if (inputs.size() != static_cast<std::size_t>(spec.input_dim())) {
    throw DimensionMismatch(
        fmt::format("fnn expects {} inputs, got {}", spec.input_dim(), inputs.size()));
  }
  std::vector<T> h(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    double v = inputs[i];
    if (!spec.input_range.empty()) {
      const auto [lo, hi] = spec.input_range[i];
      v = (v - 0.5 * (lo + hi)) * (2.0 / (hi - lo));
    }
    h[i] = T(v);
  }
  std::vector<T> z;
  std::size_t offset = 0;
  const std::size_t n_layers = spec.widths.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t in = spec.widths[l];
    const std::size_t out = spec.widths[l + 1];
    const auto w = params.subspan(offset, in * out);
    const auto b = params.subspan(offset + in * out, out);
    offset += in * out + out;
    z.resize(out);
    for (std::size_t i = 0; i < out; ++i) {
      z[i] = ad::dot(w.subspan(i * in, in), std::span<const T>(h)) + b[i];
    }
    if (l + 1 == n_layers) break;
    h.resize(out);
    for (std::size_t i = 0; i < out; ++i) h[i] = activate(spec.activation, z[i]);
  }
  return z;
}

template <class T>
T deeponet_eval(const DeepONetSpec& spec, std::span<const T> params,
                std::span<const double> sensors, std::span<const double> x) {
  check_params(spec.param_count(), params.size(), "deeponet");
  const auto branch = fnn_values<T>(spec.branch, params.first(spec.branch.param_count()), sensors);
  const auto trunk = fnn_values<T>(spec.trunk, params.subspan(spec.branch.param_count()), x);
  return ad::dot(std::span<const T>(branch), std::span<const T>(trunk));
}

namespace {

// Generator evaluation with jets in the query coordinates.
template <class T>
std::vector<Jet<T>> generator_jets(const GeneratorSpec& spec, std::span<const T> latent,
                                   std::span<const Jet<double>> query) {
  if (!spec.frozen_weights) throw WeightsFileMissing("generator has no weights loaded");
  check_params(static_cast<std::size_t>(spec.latent_dim), latent.size(), "generator");
  const std::span<const double> weights(*spec.frozen_weights);
  int order = 0;
  for (const auto& q : query) order = std::max(order, q.order());

  if (spec.mode == GeneratorSpec::Mode::Basis) {
    const auto phi = fnn_forward<double>(spec.network, weights, query);
    Jet<T> g(T(0.0), order);
    std::vector<T> column(phi.size());
    for (int k = 0; k <= order; ++k) {
      for (std::size_t j = 0; j < phi.size(); ++j) column[j] = T(phi[j][k]);
      g[k] = ad::dot(latent, std::span<const T>(column));
    }
    return {g};
  }
  std::vector<Jet<T>> inputs;
  for (const T& z : latent) inputs.emplace_back(z, order);
  for (const auto& q : query) {
    Jet<T> qj(T(q[0]), q.order());
    for (int k = 1; k <= q.order(); ++k) qj[k] = T(q[k]);
    inputs.push_back(qj);
  }
  const std::vector<T> frozen(weights.begin(), weights.end());
  return fnn_forward<T>(spec.network, frozen, inputs);
}

}  // namespace

template <class T>
T generator_eval(const GeneratorSpec& spec, std::span<const T> latent,
                 std::span<const double> x) {
  std::vector<Jet<double>> q;
  for (double v : x) q.emplace_back(v, 0);
  return generator_jets<T>(spec, latent, q).front()[0];
}

template <class T>
std::vector<Jet<T>> surrogate_eval_jets(const Surrogate& s, std::span<const T> params,
                                        std::span<const double> x, std::size_t axis, int order,
                                        const DropoutMask* mask) {
  check_jet_order(order);
  check_params(param_count(s), params.size(), surrogate_kind(s).c_str());
  return std::visit(
      [&](const auto& spec) -> std::vector<Jet<T>> {
        using S = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<S, IdentitySpec>) {
          std::vector<Jet<T>> out;
          for (const T& p : params) out.emplace_back(p, order);
          return out;
        } else {
          if (x.size() != static_cast<std::size_t>(input_dim(s))) {
            throw DimensionMismatch(fmt::format("{} expects {}-d input, got {}",
                                                surrogate_kind(s), input_dim(s), x.size()));
          }
          if (order > 0 && axis >= x.size()) {
            throw DimensionMismatch("derivative direction outside the input dimension");
          }
          if constexpr (std::is_same_v<S, FnnSpec>) {
            std::vector<Jet<T>> in;
            for (std::size_t i = 0; i < x.size(); ++i) {
              in.push_back(i == axis ? Jet<T>::variable(T(x[i]), order) : Jet<T>(T(x[i]), order));
            }
            return fnn_forward<T>(spec, params, in, mask);
          } else if constexpr (std::is_same_v<S, DeepONetSpec>) {
            const std::size_t n_sensors = spec.branch.input_dim();
            if (order > 0 && axis < n_sensors) {
              throw DimensionMismatch("deeponet derivatives are taken in trunk coordinates only");
            }
            const auto branch = fnn_values<T>(spec.branch, params.first(spec.branch.param_count()),
                                              x.first(n_sensors));
            std::vector<Jet<T>> q;
            for (std::size_t i = n_sensors; i < x.size(); ++i) {
              q.push_back(i == axis ? Jet<T>::variable(T(x[i]), order) : Jet<T>(T(x[i]), order));
            }
            const auto trunk =
                fnn_forward<T>(spec.trunk, params.subspan(spec.branch.param_count()), q);
            Jet<T> g(T(0.0), order);
            std::vector<T> column(trunk.size());
            for (int k = 0; k <= order; ++k) {
              for (std::size_t j = 0; j < trunk.size(); ++j) column[j] = trunk[j][k];
              g[k] = ad::dot(std::span<const T>(branch), std::span<const T>(column));
            }
            return {g};
          } else if constexpr (std::is_same_v<S, GeneratorSpec>) {
            std::vector<Jet<double>> q;
            for (std::size_t i = 0; i < x.size(); ++i) {
              q.push_back(i == axis ? Jet<double>::variable(x[i], order) : Jet<double>(x[i], order));
            }
            return generator_jets<T>(spec, params, q);
          } else {
            std::vector<Jet<T>> in;
            for (std::size_t i = 0; i < x.size(); ++i) {
              in.push_back(i == axis ? Jet<T>::variable(T(x[i]), order) : Jet<T>(T(x[i]), order));
            }
            std::vector<Jet<T>> out;
            if constexpr (std::is_same_v<T, double>) {
              out = spec.eval_double(params, in);
            } else {
              out = spec.eval_var(params, in);
            }
            if (out.size() != static_cast<std::size_t>(spec.out_dim)) {
              throw DimensionMismatch("custom surrogate returned the wrong number of outputs");
            }
            return out;
          }
        }
      },
      s);
}

template <class T>
std::vector<T> surrogate_eval(const Surrogate& s, std::span<const T> params,
                              std::span<const double> x, const DropoutMask* mask) {
  if (const auto* fnn = std::get_if<FnnSpec>(&s); fnn != nullptr && mask == nullptr) {
    return fnn_values<T>(*fnn, params, x);
  }
  const auto jets = surrogate_eval_jets<T>(s, params, x, 0, 0, mask);
  std::vector<T> out;
  out.reserve(jets.size());
  for (const auto& j : jets) out.push_back(j[0]);
  return out;
}

std::vector<FnnLayer> unpack_fnn(const FnnSpec& spec, std::span<const double> params) {
  check_params(spec.param_count(), params.size(), "fnn");
  std::vector<FnnLayer> layers;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    FnnLayer layer;
    layer.in = spec.widths[l];
    layer.out = spec.widths[l + 1];
    const std::size_t nw = static_cast<std::size_t>(layer.in) * layer.out;
    layer.weights.assign(params.begin() + offset, params.begin() + offset + nw);
    layer.bias.assign(params.begin() + offset + nw, params.begin() + offset + nw + layer.out);
    offset += nw + layer.out;
    layers.push_back(std::move(layer));
  }
  return layers;
}

ParamVector pack_fnn(const FnnSpec& spec, const std::vector<FnnLayer>& layers) {
  if (layers.size() + 1 != spec.widths.size()) throw ShapeMismatch("layer count mismatch");
  ParamVector out;
  out.reserve(spec.param_count());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.in != spec.widths[l] || layer.out != spec.widths[l + 1] ||
        layer.weights.size() != static_cast<std::size_t>(layer.in) * layer.out ||
        layer.bias.size() != static_cast<std::size_t>(layer.out)) {
      throw ShapeMismatch(fmt::format("layer {} shape mismatch", l));
    }
    out.insert(out.end(), layer.weights.begin(), layer.weights.end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  }
  return out;
}

namespace {

void init_fnn(const FnnSpec& spec, std::mt19937_64& rng, ParamVector& out) {
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const int in = spec.widths[l];
    const int fan_out = spec.widths[l + 1];
    const std::size_t nw = static_cast<std::size_t>(in) * fan_out;
    if (spec.activation == Activation::Tanh) {
      const double a = std::sqrt(6.0 / (in + fan_out));
      std::uniform_real_distribution<double> dist(-a, a);
      for (std::size_t i = 0; i < nw; ++i) out.push_back(dist(rng));
    } else {
      std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / in));
      for (std::size_t i = 0; i < nw; ++i) out.push_back(dist(rng));
    }
    out.insert(out.end(), fan_out, 0.0);
  }
}

}  // namespace

ParamVector initial_params(const Surrogate& s, std::mt19937_64& rng) {
  ParamVector out;
  out.reserve(param_count(s));
  std::visit(
      [&](const auto& spec) {
        using S = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<S, FnnSpec>) {
          init_fnn(spec, rng, out);
        } else if constexpr (std::is_same_v<S, DeepONetSpec>) {
          init_fnn(spec.branch, rng, out);
          init_fnn(spec.trunk, rng, out);
        } else if constexpr (std::is_same_v<S, CustomSpec>) {
          std::normal_distribution<double> dist(0.0, 1.0);
          for (std::size_t i = 0; i < spec.n_params; ++i) out.push_back(dist(rng));
        } else {
          out.assign(param_count(s), 0.0);
        }
      },
      s);
  return out;
}

// ---------------------------------------------------------------- weights files

void write_fnn_weights(const std::filesystem::path& path, const FnnSpec& spec,
                       std::span<const double> weights) {
  check_params(spec.param_count(), weights.size(), "weights file");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  std::string widths;
  for (std::size_t i = 0; i < spec.widths.size(); ++i) {
    widths += (i ? "," : "") + std::to_string(spec.widths[i]);
  }
  out << "# fnn " << widths << ' ' << activation_name(spec.activation) << '\n';
  for (double w : weights) out << fmt::format("{:.17g}\n", w);
  if (!out) throw IoError("failed writing " + path.string());
}

std::pair<FnnSpec, std::vector<double>> read_fnn_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw WeightsFileMissing(path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string hash;
  std::string kind;
  hs >> hash >> kind;
  if (hash != "#" || kind != "fnn") {
    throw ShapeMismatch(path.string() + ": header must start with '# fnn'");
  }
  std::vector<std::string> tokens;
  for (std::string t; hs >> t;) tokens.push_back(t);
  if (tokens.size() < 2) throw ShapeMismatch(path.string() + ": header needs widths and activation");
  FnnSpec spec;
  spec.activation = parse_activation(tokens.back());
  tokens.pop_back();
  for (const auto& t : tokens) {
    std::istringstream ws(t);
    for (std::string piece; std::getline(ws, piece, ',');) {
      if (piece.empty()) continue;
      int w = 0;
      const auto res = std::from_chars(piece.data(), piece.data() + piece.size(), w);
      if (res.ec != std::errc{}) throw ShapeMismatch(path.string() + ": bad width '" + piece + "'");
      spec.widths.push_back(w);
    }
  }
  spec.validate();
  std::vector<double> weights;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    double v = 0.0;
    const auto res = std::from_chars(line.data(), line.data() + line.size(), v);
    if (res.ec != std::errc{}) throw ShapeMismatch(path.string() + ": bad value '" + line + "'");
    weights.push_back(v);
  }
  if (weights.size() != spec.param_count()) {
    throw ShapeMismatch(fmt::format("{}: {} values for a network with {} parameters",
                                    path.string(), weights.size(), spec.param_count()));
  }
  return {std::move(spec), std::move(weights)};
}

GeneratorSpec load_generator(const std::filesystem::path& path, int query_dim) {
  auto [network, weights] = read_fnn_weights(path);
  GeneratorSpec g;
  g.query_dim = query_dim;
  if (network.input_dim() == query_dim) {
    g.mode = GeneratorSpec::Mode::Basis;
    g.latent_dim = network.output_dim();
  } else if (network.input_dim() > query_dim && network.output_dim() == 1) {
    g.mode = GeneratorSpec::Mode::Joint;
    g.latent_dim = network.input_dim() - query_dim;
  } else {
    throw ShapeMismatch(fmt::format("{}: network {}->{} fits neither generator layout",
                                    path.string(), network.input_dim(), network.output_dim()));
  }
  g.network = std::move(network);
  g.frozen_weights = std::make_shared<const std::vector<double>>(std::move(weights));
  return g;
}

#define UQ_INSTANTIATE(T)                                                                      \
  template std::vector<Jet<T>> fnn_forward<T>(const FnnSpec&, std::span<const T>,            \
                                              std::span<const Jet<T>>, const DropoutMask*);   \
  template std::vector<T> fnn_values<T>(const FnnSpec&, std::span<const T>,                   \
                                        std::span<const double>);                             \
  template T deeponet_eval<T>(const DeepONetSpec&, std::span<const T>, std::span<const double>, \
                              std::span<const double>);                                       \
  template T generator_eval<T>(const GeneratorSpec&, std::span<const T>,                      \
                               std::span<const double>);                                      \
  template std::vector<Jet<T>> surrogate_eval_jets<T>(const Surrogate&, std::span<const T>,  \
                                                      std::span<const double>, std::size_t,   \
                                                      int, const DropoutMask*);               \
  template std::vector<T> surrogate_eval<T>(const Surrogate&, std::span<const T>,             \
                                            std::span<const double>, const DropoutMask*);

UQ_INSTANTIATE(double)
UQ_INSTANTIATE(Var)

#undef UQ_INSTANTIATE

}  // namespace uq
