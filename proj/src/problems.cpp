#include "uq/problems.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>

namespace uq {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

Dataset make_set(std::size_t dx, std::size_t du, DataTag tag, std::vector<double> noise) {
  Dataset d;
  d.dx = dx;
  d.du = du;
  d.tag = tag;
  d.noise_std = std::move(noise);
  return d;
}

void add_noise(Dataset& d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.du; ++j) d.targets[i * d.du + j] += d.noise_std[j] * normal(rng);
  }
}

// ---------------------------------------------------------------- sine

constexpr double kSineAmp = 1.5;
constexpr double kSineFreq = 11.0;
constexpr double kSineNoise = 0.05;

ProblemData sine_regression(std::uint64_t seed) {
  ProblemData p;
  std::mt19937_64 rng(seed);
  Dataset u = make_set(1, 1, DataTag::U, {kSineNoise});
  for (double x : linspace(-0.7, -0.3, 3)) {
    u.inputs.push_back(x);
    u.targets.push_back(kSineAmp * std::sin(kSineFreq * x));
  }
  add_noise(u, rng);
  p.datasets["u"] = std::move(u);
  for (double x : linspace(-1.0, 1.0, 201)) {
    p.reference.grid.push_back(x);
    p.reference.values.push_back(kSineAmp * std::sin(kSineFreq * x));
  }
  return p;
}

// ---------------------------------------------------------------- diffusion-reaction
// D u_xx - k_r u^3 = f on [-1, 1] with manufactured u = A sin(pi x).

constexpr double kDiffusion = 0.01;
constexpr double kReaction = 0.2;
constexpr double kDrNoise = 0.01;

double dr_u(double amp, double x) { return amp * std::sin(kPi * x); }
double dr_f(double amp, double x) {
  const double u = dr_u(amp, x);
  return -kDiffusion * kPi * kPi * u - kReaction * u * u * u;
}

void dr_reference(ProblemData& p, double amp) {
  for (double x : linspace(-1.0, 1.0, 201)) {
    p.reference.grid.push_back(x);
    p.reference.values.push_back(dr_u(amp, x));
  }
}

ProblemData diffusion_reaction_inverse(std::uint64_t seed) {
  constexpr double amp = 0.5;
  ProblemData p;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> where(-1.0, 1.0);
  Dataset u = make_set(1, 1, DataTag::U, {kDrNoise});
  for (int i = 0; i < 5; ++i) {
    const double x = where(rng);
    u.inputs.push_back(x);
    u.targets.push_back(dr_u(amp, x));
  }
  Dataset f = make_set(1, 1, DataTag::F, {kDrNoise});
  for (double x : linspace(-1.0, 1.0, 17)) {
    f.inputs.push_back(x);
    f.targets.push_back(dr_f(amp, x));
  }
  add_noise(u, rng);
  add_noise(f, rng);
  p.datasets["u"] = std::move(u);
  p.datasets["f"] = std::move(f);
  dr_reference(p, amp);
  p.truth["k_r"] = kReaction;
  return p;
}

ProblemData diffusion_reaction_forward(std::uint64_t seed) {
  constexpr double amp = 0.3;
  ProblemData p;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> where(-1.0, 1.0);
  Dataset f = make_set(1, 1, DataTag::F, {kDrNoise});
  for (int i = 0; i < 10; ++i) {
    const double x = where(rng);
    f.inputs.push_back(x);
    f.targets.push_back(dr_f(amp, x));
  }
  add_noise(f, rng);
  Dataset b = make_set(1, 1, DataTag::B, {kDrNoise});
  b.inputs = {-1.0, 1.0};
  b.targets = {0.0, 0.0};
  p.datasets["f"] = std::move(f);
  p.datasets["b"] = std::move(b);
  dr_reference(p, amp);
  return p;
}

// ---------------------------------------------------------------- Kraichnan-Orszag

constexpr double kKoNoise = 0.05;
constexpr double kKoT1 = 10.0;
constexpr std::size_t kKoCollocation = 51;

Dataset ko_collocation(std::size_t n) {
  Dataset f = make_set(1, 3, DataTag::F, {kKoNoise, kKoNoise, kKoNoise});
  f.inputs = linspace(0.0, kKoT1, n);
  f.targets.assign(3 * n, 0.0);
  return f;
}

ProblemData kraichnan_orszag(std::uint64_t seed) {
  ProblemData p;
  std::mt19937_64 rng(seed);
  const std::vector<double> y0 = {1.0, 1.0, 0.5};
  const Trajectory ref = ko_reference(1.0, 1.0, y0);
  const std::size_t counts[3] = {11, 7, 11};
  for (std::size_t k = 0; k < 3; ++k) {
    Dataset d = make_set(1, 1, DataTag::U, {kKoNoise});
    for (double t : linspace(0.0, kKoT1, counts[k])) {
      d.inputs.push_back(t);
      d.targets.push_back(ref.at(t)[k]);
    }
    add_noise(d, rng);
    p.datasets[fmt::format("x{}", k + 1)] = std::move(d);
  }
  p.datasets["f"] = ko_collocation(kKoCollocation);
  p.reference.du = 3;
  for (double t : linspace(0.0, kKoT1, 101)) {
    p.reference.grid.push_back(t);
    const auto y = ref.at(t);
    p.reference.values.insert(p.reference.values.end(), y.begin(), y.end());
  }
  p.truth["a"] = 1.0;
  p.truth["b"] = 1.0;
  return p;
}

// ---------------------------------------------------------------- KdV
// u_t - l1 u u_x - l2 u_xxx = 0 on [-10, 10] x [-2, 2].

constexpr double kKdvNoise = 0.05;

ProblemData kdv(std::uint64_t seed) {
  ProblemData p;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> xs(-10.0, 10.0);
  std::uniform_real_distribution<double> ts(-2.0, 2.0);
  Dataset u = make_set(2, 1, DataTag::U, {kKdvNoise});
  for (int i = 0; i < 200; ++i) {
    const double x = xs(rng);
    const double t = ts(rng);
    u.inputs.insert(u.inputs.end(), {x, t});
    u.targets.push_back(kdv_exact(x, t));
  }
  Dataset f = make_set(2, 1, DataTag::F, {kKdvNoise});
  for (int i = 0; i < 100; ++i) {
    const double x = xs(rng);
    const double t = ts(rng);
    f.inputs.insert(f.inputs.end(), {x, t});
    f.targets.push_back(0.0);
  }
  add_noise(u, rng);
  add_noise(f, rng);
  p.datasets["u"] = std::move(u);
  p.datasets["f"] = std::move(f);
  p.reference.dx = 2;
  for (double t : linspace(-2.0, 2.0, 21)) {
    for (double x : linspace(-10.0, 10.0, 41)) {
      p.reference.grid.insert(p.reference.grid.end(), {x, t});
      p.reference.values.push_back(kdv_exact(x, t));
    }
  }
  p.truth["lambda1"] = 1.5;
  p.truth["lambda2"] = 0.25;
  return p;
}

// ---------------------------------------------------------------- antiderivative

constexpr std::size_t kOpSensors = 20;
constexpr double kOpNoise = 0.01;

ProblemData antiderivative(std::uint64_t seed) {
  ProblemData p;
  OperatorDataset train = antiderivative_data(500, kOpSensors, 10, seed);
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::normal_distribution<double> normal(0.0, kOpNoise);
  for (auto& row : train.targets) {
    for (double& v : row) v += normal(rng);
  }
  p.operator_train = std::move(train);
  p.operator_noise = kOpNoise;

  const OperatorDataset test = antiderivative_data(100, kOpSensors, 21, seed + 1);
  p.reference.dx = kOpSensors + 1;
  for (std::size_t i = 0; i < test.n_functions(); ++i) {
    for (std::size_t j = 0; j < test.locations.size(); ++j) {
      p.reference.grid.insert(p.reference.grid.end(), test.sensor_values[i].begin(),
                              test.sensor_values[i].end());
      p.reference.grid.push_back(test.locations[j]);
      p.reference.values.push_back(test.targets[i][j]);
    }
  }
  return p;
}

// ---------------------------------------------------------------- models

double inverse_softplus(double s) { return std::log(std::expm1(s)); }

Process make_process(std::string key, Surrogate s, const ModelOptions& o, Prior prior,
                     std::mt19937_64& rng) {
  Process p{std::move(key), std::move(s), {}};
  switch (o.family) {
    case Family::Samplable: p.variable = VariableSpec::samplable(prior); break;
    case Family::Variational: {
      VariationalParams q;
      q.mean = initial_params(p.surrogate, rng);
      q.rho.assign(q.mean.size(), inverse_softplus(o.init_std));
      p.variable = VariableSpec::variational_family(prior, std::move(q));
      break;
    }
    case Family::Trainable: p.variable = VariableSpec::trainable(o.l2); break;
  }
  return p;
}

FnnSpec field_net(int in, const std::vector<int>& hidden, int out, Activation act,
                  std::vector<std::pair<double, double>> range = {}) {
  FnnSpec f;
  f.widths.push_back(in);
  f.widths.insert(f.widths.end(), hidden.begin(), hidden.end());
  f.widths.push_back(out);
  f.activation = act;
  f.input_range = std::move(range);
  f.validate();
  return f;
}

std::vector<int> hidden_or(const ModelOptions& o, std::vector<int> fallback) {
  return o.hidden.empty() ? fallback : o.hidden;
}

void require_surrogate(const ModelOptions& o, std::string_view id,
                       std::initializer_list<std::string_view> allowed) {
  for (auto a : allowed) {
    if (o.surrogate == a) return;
  }
  throw ConfigError(fmt::format("surrogate '{}' is not available for problem '{}'", o.surrogate, id));
}

Prior kr_prior(const ModelOptions& o) {
  if (o.kr_prior == "normal") return NormalPrior{0.0, 1.0};
  if (o.kr_prior == "halfnormal") return HalfNormalPrior{1.0};
  if (o.kr_prior == "lognormal") return LogNormalPrior{0.0, 1.0};
  throw ConfigError(fmt::format("unknown k_r prior '{}'", o.kr_prior));
}

ResidualFn dr_residual() {
  return make_residual({"u", "k_r"}, {0}, 2, 1, [](const auto& c) {
    const auto& u = c.jets("u")[0];
    const auto k = c.jets("k_r")[0][0];
    return std::vector{kDiffusion * u[2] - k * u[0] * u[0] * u[0]};
  });
}

ProblemModel sine_model(const ProblemData& d, const ModelOptions& o) {
  require_surrogate(o, d.id, {"bnn", "fnn", "generator"});
  std::mt19937_64 rng(o.seed);
  ProblemModel pm;
  pm.field = "u";
  pm.aleatoric = {kSineNoise};
  const NormalPrior prior{0.0, o.prior_std};
  if (o.surrogate == "generator") {
    const auto path =
        o.generator.empty() ? data_dir() / "generators" / "sine11_basis.csv" : o.generator;
    pm.model.add_process(make_process("u", load_generator(path), o, prior, rng));
  } else {
    pm.model.add_process(make_process(
        "u", field_net(1, hidden_or(o, {50}), 1, o.activation), o, prior, rng));
  }
  pm.model.add_term(DirectTerm{"u", d.datasets.at("u"), {}});
  return pm;
}

ProblemModel dr_model(const ProblemData& d, const ModelOptions& o, bool inverse) {
  require_surrogate(o, d.id, {"bnn", "fnn"});
  std::mt19937_64 rng(o.seed);
  ProblemModel pm;
  pm.field = "u";
  pm.aleatoric = {kDrNoise};
  const NormalPrior prior{0.0, o.prior_std};
  pm.model.add_process(
      make_process("u", field_net(1, hidden_or(o, {20, 20}), 1, o.activation), o, prior, rng));
  if (inverse) {
    const Prior kp = kr_prior(o);
    Process k = make_process("k_r", IdentitySpec{1}, o, kp, rng);
    if (o.family == Family::Samplable) {
      k.variable.init = InitStrategy::Constant;
      k.variable.init_value = std::holds_alternative<LogNormalPrior>(kp) ? std::log(0.5) : 0.5;
    }
    pm.model.add_process(std::move(k));
    pm.constants = {"k_r"};
    pm.model.add_term(DirectTerm{"u", d.datasets.at("u"), {}});
    pm.model.add_term(ResidualTerm{dr_residual(), d.datasets.at("f")});
  } else {
    ResidualFn fn = make_residual({"u"}, {0}, 2, 1, [](const auto& c) {
      const auto& u = c.jets("u")[0];
      return std::vector{kDiffusion * u[2] - kReaction * u[0] * u[0] * u[0]};
    });
    pm.model.add_term(ResidualTerm{std::move(fn), d.datasets.at("f")});
    pm.model.add_term(DirectTerm{"u", d.datasets.at("b"), {}});
  }
  return pm;
}

ProblemModel ko_model(const ProblemData& d, const ModelOptions& o) {
  require_surrogate(o, d.id, {"bnn", "fnn"});
  std::mt19937_64 rng(o.seed);
  ProblemModel pm;
  pm.field = "x";
  pm.aleatoric = {kKoNoise, kKoNoise, kKoNoise};
  pm.constants = {"a", "b"};
  const NormalPrior prior{0.0, o.prior_std};
  pm.model.add_process(make_process(
      "x", field_net(1, hidden_or(o, {32, 32}), 3, o.activation, {{0.0, kKoT1}}), o, prior, rng));
  pm.model.add_process(make_process("a", IdentitySpec{1}, o, NormalPrior{}, rng));
  pm.model.add_process(make_process("b", IdentitySpec{1}, o, NormalPrior{}, rng));
  for (int k = 0; k < 3; ++k) {
    pm.model.add_term(DirectTerm{"x", d.datasets.at(fmt::format("x{}", k + 1)), {k}});
  }
  ResidualFn fn = make_residual({"x", "a", "b"}, {0}, 1, 3, [](const auto& c) {
    const auto& x = c.jets("x");
    const auto a = c.jets("a")[0][0];
    const auto b = c.jets("b")[0][0];
    return std::vector{x[0][1] - a * x[1][0] * x[2][0], x[1][1] - b * x[0][0] * x[2][0],
                       x[2][1] + (a + b) * x[0][0] * x[1][0]};
  });
  const Dataset f = o.collocation > 0 ? ko_collocation(o.collocation) : d.datasets.at("f");
  pm.model.add_term(ResidualTerm{std::move(fn), f});
  return pm;
}

ProblemModel kdv_model(const ProblemData& d, const ModelOptions& o) {
  require_surrogate(o, d.id, {"bnn", "fnn"});
  std::mt19937_64 rng(o.seed);
  ProblemModel pm;
  pm.field = "u";
  pm.aleatoric = {kKdvNoise};
  pm.constants = {"lambda1", "lambda2"};
  const NormalPrior prior{0.0, o.prior_std};
  pm.model.add_process(make_process(
      "u", field_net(2, hidden_or(o, {20, 20}), 1, o.activation, {{-10.0, 10.0}, {-2.0, 2.0}}), o,
      prior, rng));
  pm.model.add_process(make_process("lambda1", IdentitySpec{1}, o, NormalPrior{}, rng));
  pm.model.add_process(make_process("lambda2", IdentitySpec{1}, o, NormalPrior{}, rng));
  pm.model.add_term(DirectTerm{"u", d.datasets.at("u"), {}});
  ResidualFn fn = make_residual({"u", "lambda1", "lambda2"}, {0, 1}, 3, 1, [](const auto& c) {
    const auto& ux = c.jets("u", 0)[0];
    const auto& ut = c.jets("u", 1)[0];
    const auto l1 = c.jets("lambda1")[0][0];
    const auto l2 = c.jets("lambda2")[0][0];
    return std::vector{ut[1] - l1 * ux[0] * ux[1] - l2 * ux[3]};
  });
  pm.model.add_term(ResidualTerm{std::move(fn), d.datasets.at("f")});
  return pm;
}

ProblemModel antiderivative_model(const ProblemData& d, const ModelOptions& o) {
  require_surrogate(o, d.id, {"deeponet"});
  std::mt19937_64 rng(o.seed);
  ProblemModel pm;
  pm.field = "G";
  pm.aleatoric = {d.operator_noise};
  const auto hidden = hidden_or(o, {32, 32});
  std::vector<int> inner(hidden.begin(), hidden.end() - 1);
  const int latent = hidden.back();
  DeepONetSpec spec;
  spec.branch = field_net(static_cast<int>(kOpSensors), inner, latent, o.activation);
  spec.trunk = field_net(1, inner, latent, o.activation, {{0.0, 1.0}});
  spec.validate();
  pm.model.add_process(make_process("G", spec, o, NormalPrior{0.0, o.prior_std}, rng));
  pm.model.add_term(OperatorTerm{"G", *d.operator_train, d.operator_noise});
  return pm;
}

}  // namespace

// ---------------------------------------------------------------- public

std::vector<double> Trajectory::at(double time) const {
  if (t.empty()) throw EmptyDataset("empty trajectory");
  if (time <= t.front()) return {y.begin(), y.begin() + static_cast<long>(dim)};
  if (time >= t.back()) return {y.end() - static_cast<long>(dim), y.end()};
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  const std::size_t hi = static_cast<std::size_t>(it - t.begin());
  const std::size_t lo = hi - 1;
  const double w = (time - t[lo]) / (t[hi] - t[lo]);
  std::vector<double> out(dim);
  for (std::size_t k = 0; k < dim; ++k) out[k] = (1.0 - w) * y[lo * dim + k] + w * y[hi * dim + k];
  return out;
}

Trajectory rk4_solve(const OdeRhs& rhs, std::span<const double> y0, double t0, double t1,
                     double dt) {
  if (!(dt > 0.0)) throw ConfigError("rk4 step must be positive");
  if (!(t1 >= t0)) throw ConfigError("rk4 span must be non-decreasing");
  const std::size_t n = y0.size();
  Trajectory tr;
  tr.dim = n;
  tr.t.push_back(t0);
  tr.y.assign(y0.begin(), y0.end());
  std::vector<double> y(y0.begin(), y0.end()), k1(n), k2(n), k3(n), k4(n), tmp(n);
  const auto steps = static_cast<std::size_t>(std::ceil((t1 - t0) / dt - 1e-9));
  double t = t0;
  for (std::size_t s = 0; s < steps; ++s) {
    const double h = s + 1 == steps ? t1 - t : dt;
    rhs(t, y, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    rhs(t + 0.5 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    rhs(t + 0.5 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    rhs(t + h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!std::isfinite(y[i])) throw NonFiniteState(fmt::format("state blew up at t = {}", t + h));
    }
    t = s + 1 == steps ? t1 : t0 + static_cast<double>(s + 1) * dt;
    tr.t.push_back(t);
    tr.y.insert(tr.y.end(), y.begin(), y.end());
  }
  return tr;
}

Trajectory ko_reference(double a, double b, std::span<const double> y0, double t0, double t1,
                        double dt) {
  if (y0.size() != 3) throw DimensionMismatch("Kraichnan-Orszag state has three components");
  return rk4_solve(
      [a, b](double, std::span<const double> x, std::span<double> dx) {
        dx[0] = a * x[1] * x[2];
        dx[1] = b * x[0] * x[2];
        dx[2] = -(a + b) * x[0] * x[1];
      },
      y0, t0, t1, dt);
}

double antiderivative_lambda(std::span<const double> c, double x) {
  double s = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * std::sin(double(k + 1) * kPi * x);
  return s;
}

double antiderivative_u(std::span<const double> c, double x) {
  double s = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double w = double(k + 1) * kPi;
    s -= c[k] * (std::cos(w * x) - 1.0) / w;
  }
  return s;
}

OperatorDataset antiderivative_data(std::size_t n_functions, std::size_t n_sensors,
                                    std::size_t n_outputs, std::uint64_t seed) {
  if (n_functions < 1 || n_sensors < 1 || n_outputs < 1) {
    throw ConfigError("antiderivative data needs positive counts");
  }
  OperatorDataset d;
  d.sensor_locations = linspace(0.0, 1.0, n_sensors);
  d.locations = linspace(0.0, 1.0, n_outputs);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n_functions; ++i) {
    double c[3];
    for (int k = 0; k < 3; ++k) c[k] = normal(rng) / double(k + 1);
    std::vector<double> lam, u;
    for (double x : d.sensor_locations) lam.push_back(antiderivative_lambda(c, x));
    for (double x : d.locations) u.push_back(antiderivative_u(c, x));
    d.sensor_values.push_back(std::move(lam));
    d.targets.push_back(std::move(u));
  }
  return d;
}

double kdv_exact(double x, double t) {
  constexpr double a1 = 1.0;
  constexpr double a2 = 2.0;
  const double b = std::log(3.0) / 2.0;
  const double e1 = a1 * x + a1 * a1 * a1 * t + b;
  const double e2 = a2 * x + a2 * a2 * a2 * t + b;
  const double c = (a1 - a2) * (a1 - a2) / ((a1 + a2) * (a1 + a2));
  // u = 2 (S''/S - (S'/S)^2) with S a sum of exponentials: twice the
  // variance of the exponent slopes under the softmax weights.
  const double expo[4] = {-e1 - e2, e1 - e2, e2 - e1, e1 + e2 + std::log(c)};
  const double slope[4] = {-a1 - a2, a1 - a2, a2 - a1, a1 + a2};
  const double m = *std::max_element(expo, expo + 4);
  double w_sum = 0.0, m1 = 0.0, m2 = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double w = std::exp(expo[k] - m);
    w_sum += w;
    m1 += w * slope[k];
    m2 += w * slope[k] * slope[k];
  }
  m1 /= w_sum;
  m2 /= w_sum;
  return 2.0 * (m2 - m1 * m1);
}

const std::vector<ProblemInfo>& problem_catalog() {
  static const std::vector<ProblemInfo> kCatalog = {
      {"antiderivative", "DeepONet for the antiderivative operator"},
      {"diffusion_reaction_forward", "nonlinear diffusion-reaction, solve for u from f"},
      {"diffusion_reaction_inverse", "nonlinear diffusion-reaction, infer u and k_r"},
      {"kdv", "two-soliton Korteweg-de Vries, infer lambda1 and lambda2"},
      {"kraichnan_orszag", "inverse Kraichnan-Orszag system, infer a and b"},
      {"sine_regression", "1-d regression of 1.5 sin(11x) from 3 points"},
  };
  return kCatalog;
}

ProblemData make_dataset(std::string_view id, std::uint64_t seed) {
  ProblemData p;
  if (id == "sine_regression") {
    p = sine_regression(seed);
  } else if (id == "diffusion_reaction_inverse") {
    p = diffusion_reaction_inverse(seed);
  } else if (id == "diffusion_reaction_forward") {
    p = diffusion_reaction_forward(seed);
  } else if (id == "kraichnan_orszag") {
    p = kraichnan_orszag(seed);
  } else if (id == "kdv") {
    p = kdv(seed);
  } else if (id == "antiderivative") {
    p = antiderivative(seed);
  } else {
    throw UnknownProblem(fmt::format("unknown problem '{}'", id));
  }
  p.id = std::string(id);
  p.seed = seed;
  return p;
}

ProblemModel build_model(const ProblemData& data, const ModelOptions& options) {
  ProblemModel pm;
  if (data.id == "sine_regression") {
    pm = sine_model(data, options);
  } else if (data.id == "diffusion_reaction_inverse") {
    pm = dr_model(data, options, true);
  } else if (data.id == "diffusion_reaction_forward") {
    pm = dr_model(data, options, false);
  } else if (data.id == "kraichnan_orszag") {
    pm = ko_model(data, options);
  } else if (data.id == "kdv") {
    pm = kdv_model(data, options);
  } else if (data.id == "antiderivative") {
    pm = antiderivative_model(data, options);
  } else {
    throw UnknownProblem(fmt::format("unknown problem '{}'", data.id));
  }
  pm.model.set_loss_weights(options.weights);
  pm.model.validate();
  return pm;
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("UQ_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return UQ_DATA_DIR;
}

}  // namespace uq
