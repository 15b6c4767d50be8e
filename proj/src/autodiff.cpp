#include "uq/autodiff.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

namespace uq::ad {

namespace {

thread_local Tape* g_active = nullptr;

// -1 encodes "no fault".
std::atomic<int> g_fault{-1};

struct TapePool {
  std::vector<std::unique_ptr<Tape>> tapes;
  std::size_t depth = 0;
};

thread_local TapePool g_pool;

// Borrows a cleared tape from the thread-local pool so nested grad() calls
// never share a tape and repeated calls reuse allocations.
class TapeLease {
 public:
  TapeLease() {
    if (g_pool.depth == g_pool.tapes.size()) {
      g_pool.tapes.push_back(std::make_unique<Tape>());
    }
    tape_ = g_pool.tapes[g_pool.depth++].get();
    tape_->clear();
  }
  ~TapeLease() { --g_pool.depth; }
  TapeLease(const TapeLease&) = delete;
  TapeLease& operator=(const TapeLease&) = delete;

  Tape& tape() { return *tape_; }

 private:
  Tape* tape_;
};

double fault_scale(Primitive op) {
  return g_fault.load(std::memory_order_relaxed) == static_cast<int>(op) ? 1.1 : 1.0;
}

void check_finite(Primitive op, double value) {
  if (!std::isfinite(value)) {
    throw NonFiniteValue(std::string(primitive_name(op)) + " produced " +
                         std::to_string(value));
  }
}

Var make_unary(Primitive op, double value, const Var& x, double partial) {
  check_finite(op, value);
  if (x.is_constant()) return Var(value);
  Tape* tape = active_tape();
  if (tape == nullptr) throw Error("Var operation without an active tape");
  const std::array<std::pair<std::int32_t, double>, 1> ops{{{x.index(), partial}}};
  return Var(value, tape->push(op, value, ops));
}

Var make_binary(Primitive op, double value, const Var& a, double da, const Var& b,
                double db) {
  check_finite(op, value);
  if (a.is_constant() && b.is_constant()) return Var(value);
  Tape* tape = active_tape();
  if (tape == nullptr) throw Error("Var operation without an active tape");
  const std::array<std::pair<std::int32_t, double>, 2> ops{
      {{a.index(), da}, {b.index(), db}}};
  return Var(value, tape->push(op, value, ops));
}

}  // namespace

std::string_view primitive_name(Primitive op) {
  switch (op) {
    case Primitive::Leaf: return "leaf";
    case Primitive::Add: return "add";
    case Primitive::Sub: return "sub";
    case Primitive::Mul: return "mul";
    case Primitive::Div: return "div";
    case Primitive::Neg: return "neg";
    case Primitive::PowInt: return "pow";
    case Primitive::Tanh: return "tanh";
    case Primitive::Sin: return "sin";
    case Primitive::Cos: return "cos";
    case Primitive::Exp: return "exp";
    case Primitive::Log: return "log";
    case Primitive::Sqrt: return "sqrt";
    case Primitive::Softplus: return "softplus";
    case Primitive::Relu: return "relu";
    case Primitive::Sum: return "sum";
    case Primitive::Dot: return "dot";
  }
  return "unknown";
}

Primitive unary_primitive(std::string_view name) {
  static constexpr std::array<Primitive, 8> kUnary = {
      Primitive::Tanh, Primitive::Sin,  Primitive::Cos,      Primitive::Exp,
      Primitive::Log,  Primitive::Sqrt, Primitive::Softplus, Primitive::Relu};
  for (Primitive p : kUnary) {
    if (primitive_name(p) == name) return p;
  }
  if (name == "max0") return Primitive::Relu;
  throw UnregisteredOp("'" + std::string(name) + "' is not a registered primitive");
}

// ---------------------------------------------------------------- Tape

std::int32_t Tape::push(Primitive op, double value,
                        std::span<const std::pair<std::int32_t, double>> operands) {
  const double scale = fault_scale(op);
  const std::size_t start = operand_.size();
  for (const auto& [index, partial] : operands) {
    if (index < 0) continue;
    operand_.push_back(index);
    partial_.push_back(partial * scale);
  }
  if (operand_.size() == start) return -1;
  ops_.push_back(op);
  values_.push_back(value);
  begin_.push_back(static_cast<std::uint32_t>(operand_.size()));
  return static_cast<std::int32_t>(ops_.size() - 1);
}

std::int32_t Tape::push_leaf(double value) {
  check_finite(Primitive::Leaf, value);
  ops_.push_back(Primitive::Leaf);
  values_.push_back(value);
  begin_.push_back(static_cast<std::uint32_t>(operand_.size()));
  return static_cast<std::int32_t>(ops_.size() - 1);
}

std::int32_t Tape::push_nary(Primitive op, double value,
                             std::span<const std::int32_t> operand_index,
                             std::span<const double> partial) {
  const double scale = fault_scale(op);
  const std::size_t start = operand_.size();
  for (std::size_t k = 0; k < operand_index.size(); ++k) {
    if (operand_index[k] < 0) continue;
    operand_.push_back(operand_index[k]);
    partial_.push_back(partial[k] * scale);
  }
  if (operand_.size() == start) return -1;
  ops_.push_back(op);
  values_.push_back(value);
  begin_.push_back(static_cast<std::uint32_t>(operand_.size()));
  return static_cast<std::int32_t>(ops_.size() - 1);
}

std::vector<double> Tape::gradient(std::int32_t output, std::size_t n_leaves) const {
  adjoint_.assign(ops_.size(), 0.0);
  if (output >= 0) {
    adjoint_[output] = 1.0;
    for (std::int32_t i = output; i >= 0; --i) {
      const double a = adjoint_[i];
      if (a == 0.0) continue;
      for (std::uint32_t j = begin_[i]; j < begin_[i + 1]; ++j) {
        adjoint_[operand_[j]] += partial_[j] * a;
      }
    }
  }
  std::vector<double> out(n_leaves, 0.0);
  std::copy_n(adjoint_.begin(), std::min(n_leaves, adjoint_.size()), out.begin());
  return out;
}

void Tape::clear() {
  ops_.clear();
  values_.clear();
  begin_.assign(1, 0);
  operand_.clear();
  partial_.clear();
}

Tape* active_tape() { return g_active; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active) { g_active = &tape; }
TapeScope::~TapeScope() { g_active = previous_; }

// ---------------------------------------------------------------- Var

Var& Var::operator+=(const Var& rhs) { return *this = *this + rhs; }
Var& Var::operator-=(const Var& rhs) { return *this = *this - rhs; }
Var& Var::operator*=(const Var& rhs) { return *this = *this * rhs; }
Var& Var::operator/=(const Var& rhs) { return *this = *this / rhs; }

Var operator+(const Var& a, const Var& b) {
  return make_binary(Primitive::Add, a.value() + b.value(), a, 1.0, b, 1.0);
}

Var operator-(const Var& a, const Var& b) {
  return make_binary(Primitive::Sub, a.value() - b.value(), a, 1.0, b, -1.0);
}

Var operator*(const Var& a, const Var& b) {
  return make_binary(Primitive::Mul, a.value() * b.value(), a, b.value(), b, a.value());
}

Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.value();
  const double v = a.value() * inv;
  return make_binary(Primitive::Div, v, a, inv, b, -v * inv);
}

Var operator-(const Var& a) { return make_unary(Primitive::Neg, -a.value(), a, -1.0); }

double pow(double x, int n) {
  double r = 1.0;
  double base = n < 0 ? 1.0 / x : x;
  for (unsigned k = static_cast<unsigned>(n < 0 ? -n : n); k != 0; k >>= 1) {
    if (k & 1u) r *= base;
    base *= base;
  }
  return r;
}

Var pow(const Var& x, int n) {
  if (n == 0) return Var(1.0);
  const double v = pow(x.value(), n);
  return make_unary(Primitive::PowInt, v, x, n * pow(x.value(), n - 1));
}

Var tanh(const Var& x) {
  const double t = std::tanh(x.value());
  return make_unary(Primitive::Tanh, t, x, 1.0 - t * t);
}

Var sin(const Var& x) {
  return make_unary(Primitive::Sin, std::sin(x.value()), x, std::cos(x.value()));
}

Var cos(const Var& x) {
  return make_unary(Primitive::Cos, std::cos(x.value()), x, -std::sin(x.value()));
}

Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return make_unary(Primitive::Exp, e, x, e);
}

Var log(const Var& x) {
  return make_unary(Primitive::Log, std::log(x.value()), x, 1.0 / x.value());
}

Var sqrt(const Var& x) {
  const double s = std::sqrt(x.value());
  return make_unary(Primitive::Sqrt, s, x, 0.5 / s);
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

Var softplus(const Var& x) {
  return make_unary(Primitive::Softplus, softplus(x.value()), x, sigmoid(x.value()));
}

Var relu(const Var& x) {
  return make_unary(Primitive::Relu, relu(x.value()), x, x.value() > 0.0 ? 1.0 : 0.0);
}

Var sigmoid(const Var& x) { return exp(x - softplus(x)); }

double apply(Primitive op, double x) {
  switch (op) {
    case Primitive::Neg: return -x;
    case Primitive::Tanh: return std::tanh(x);
    case Primitive::Sin: return std::sin(x);
    case Primitive::Cos: return std::cos(x);
    case Primitive::Exp: return std::exp(x);
    case Primitive::Log: return std::log(x);
    case Primitive::Sqrt: return std::sqrt(x);
    case Primitive::Softplus: return softplus(x);
    case Primitive::Relu: return relu(x);
    default: break;
  }
  throw UnregisteredOp(std::string(primitive_name(op)) + " is not a unary primitive");
}

Var apply(Primitive op, const Var& x) {
  switch (op) {
    case Primitive::Neg: return -x;
    case Primitive::Tanh: return tanh(x);
    case Primitive::Sin: return sin(x);
    case Primitive::Cos: return cos(x);
    case Primitive::Exp: return exp(x);
    case Primitive::Log: return log(x);
    case Primitive::Sqrt: return sqrt(x);
    case Primitive::Softplus: return softplus(x);
    case Primitive::Relu: return relu(x);
    default: break;
  }
  throw UnregisteredOp(std::string(primitive_name(op)) + " is not a unary primitive");
}

double sum(std::span<const double> xs) { return std::accumulate(xs.begin(), xs.end(), 0.0); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot of unequal lengths");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

namespace {
thread_local std::vector<std::int32_t> g_nary_index;
thread_local std::vector<double> g_nary_partial;
}  // namespace

Var sum(std::span<const Var> xs) {
  double v = 0.0;
  g_nary_index.clear();
  g_nary_partial.clear();
  for (const Var& x : xs) {
    v += x.value();
    if (!x.is_constant()) {
      g_nary_index.push_back(x.index());
      g_nary_partial.push_back(1.0);
    }
  }
  check_finite(Primitive::Sum, v);
  if (g_nary_index.empty()) return Var(v);
  Tape* tape = active_tape();
  if (tape == nullptr) throw Error("Var operation without an active tape");
  return Var(v, tape->push_nary(Primitive::Sum, v, g_nary_index, g_nary_partial));
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot of unequal lengths");
  double v = 0.0;
  g_nary_index.clear();
  g_nary_partial.clear();
  for (std::size_t k = 0; k < a.size(); ++k) {
    v += a[k].value() * b[k].value();
    if (!a[k].is_constant()) {
      g_nary_index.push_back(a[k].index());
      g_nary_partial.push_back(b[k].value());
    }
    if (!b[k].is_constant()) {
      g_nary_index.push_back(b[k].index());
      g_nary_partial.push_back(a[k].value());
    }
  }
  check_finite(Primitive::Dot, v);
  if (g_nary_index.empty()) return Var(v);
  Tape* tape = active_tape();
  if (tape == nullptr) throw Error("Var operation without an active tape");
  return Var(v, tape->push_nary(Primitive::Dot, v, g_nary_index, g_nary_partial));
}

void inject_fault(std::optional<Primitive> op) {
  g_fault.store(op ? static_cast<int>(*op) : -1, std::memory_order_relaxed);
}

std::optional<Primitive> injected_fault() {
  const int f = g_fault.load(std::memory_order_relaxed);
  if (f < 0) return std::nullopt;
  return static_cast<Primitive>(f);
}

// ---------------------------------------------------------------- drivers

namespace {

std::vector<Var> seed_leaves(Tape& tape, std::span<const double> at) {
  std::vector<Var> params;
  params.reserve(at.size());
  for (double v : at) params.emplace_back(v, tape.push_leaf(v));
  return params;
}

}  // namespace

ValueGrad grad(const ScalarFn& fn, std::span<const double> at) {
  TapeLease lease;
  Tape& tape = lease.tape();
  TapeScope scope(tape);
  const std::vector<Var> params = seed_leaves(tape, at);
  const Var out = fn(params);
  check_finite(Primitive::Leaf, out.value());
  ValueGrad result;
  result.value = out.value();
  result.gradient = tape.gradient(out.index(), at.size());
  return result;
}

ValueGrad grad_through_jets(const ScalarFn& fn, std::span<const double> at) {
  return grad(fn, at);
}

std::vector<std::vector<double>> jacobian(const VectorFn& fn, std::span<const double> at,
                                          std::vector<double>* values) {
  TapeLease lease;
  Tape& tape = lease.tape();
  TapeScope scope(tape);
  const std::vector<Var> params = seed_leaves(tape, at);
  const std::vector<Var> out = fn(params);
  std::vector<std::vector<double>> rows;
  rows.reserve(out.size());
  if (values != nullptr) values->clear();
  for (const Var& o : out) {
    rows.push_back(tape.gradient(o.index(), at.size()));
    if (values != nullptr) values->push_back(o.value());
  }
  return rows;
}

double evaluate(const ScalarFn& fn, std::span<const double> at) {
  TapeLease lease;
  Tape& tape = lease.tape();
  TapeScope scope(tape);
  return fn(seed_leaves(tape, at)).value();
}

double grad_check(const ScalarFn& fn, std::span<const double> at, double eps) {
  const ValueGrad ad = grad(fn, at);
  std::vector<double> probe(at.begin(), at.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < at.size(); ++i) {
    probe[i] = at[i] + eps;
    const double up = evaluate(fn, probe);
    probe[i] = at[i] - eps;
    const double down = evaluate(fn, probe);
    probe[i] = at[i];
    const double fd = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(ad.gradient[i] - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

}  // namespace uq::ad
