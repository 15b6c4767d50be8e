#pragma once

// Scalar reverse-mode automatic differentiation.
//
// A Tape records every operation applied to Var values while it is the
// active tape of the calling thread. Each node stores its opcode, its
// operand indices and the local partial derivatives with respect to those
// operands, so the reverse sweep is a single pass of scaled accumulations.
// Constants (Var built from a double) never enter the tape.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "uq/errors.hpp"

namespace uq::ad {

enum class Primitive : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  PowInt,
  Tanh,
  Sin,
  Cos,
  Exp,
  Log,
  Sqrt,
  Softplus,
  Relu,
  Sum,  // n-ary +
  Dot,  // n-ary sum of products
};

std::string_view primitive_name(Primitive op);

// Looks up a registered unary primitive by name ("tanh", "sin", ...).
// Throws UnregisteredOp for anything outside the registered set.
Primitive unary_primitive(std::string_view name);

class Tape {
 public:
  Tape() { begin_.push_back(0); }

  // Appends a node and returns its index. Operands with index < 0 are
  // constants and are skipped. If every operand is a constant the node
  // is not recorded and -1 is returned.
  std::int32_t push(Primitive op, double value,
                    std::span<const std::pair<std::int32_t, double>> operands);
  std::int32_t push_leaf(double value);

  // Adds a node directly from parallel operand/partial arrays (used by the
  // n-ary Sum and Dot nodes to avoid an intermediate pair buffer).
  std::int32_t push_nary(Primitive op, double value,
                         std::span<const std::int32_t> operand_index,
                         std::span<const double> partial);

  // Reverse sweep seeded with d(output)/d(output) = 1. Returns the
  // adjoints of the first n_leaves nodes.
  std::vector<double> gradient(std::int32_t output, std::size_t n_leaves) const;

  std::size_t size() const { return ops_.size(); }
  double value(std::int32_t index) const { return values_[index]; }
  Primitive op(std::int32_t index) const { return ops_[index]; }
  void clear();

 private:
  std::vector<Primitive> ops_;
  std::vector<double> values_;
  std::vector<std::uint32_t> begin_;  // size() + 1 offsets into operand_
  std::vector<std::int32_t> operand_;
  std::vector<double> partial_;
  mutable std::vector<double> adjoint_;
};

// The tape that newly created Vars record on for the current thread.
Tape* active_tape();

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

class Var {
 public:
  Var() = default;
  Var(double constant) : value_(constant) {}  // NOLINT: implicit on purpose
  Var(double value, std::int32_t index) : value_(value), index_(index) {}

  double value() const { return value_; }
  std::int32_t index() const { return index_; }
  bool is_constant() const { return index_ < 0; }

  Var& operator+=(const Var& rhs);
  Var& operator-=(const Var& rhs);
  Var& operator*=(const Var& rhs);
  Var& operator/=(const Var& rhs);

 private:
  double value_ = 0.0;
  std::int32_t index_ = -1;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

Var pow(const Var& x, int n);
Var tanh(const Var& x);
Var sin(const Var& x);
Var cos(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var sqrt(const Var& x);
Var softplus(const Var& x);
Var relu(const Var& x);
// Composite: exp(x - softplus(x)).
Var sigmoid(const Var& x);
Var apply(Primitive op, const Var& x);

Var sum(std::span<const Var> xs);
Var dot(std::span<const Var> a, std::span<const Var> b);

// Plain-double counterparts so templated code can be written once.
double pow(double x, int n);
double softplus(double x);
double relu(double x);
double sigmoid(double x);
double apply(Primitive op, double x);
double sum(std::span<const double> xs);
double dot(std::span<const double> a, std::span<const double> b);

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

// Test hook: when set, the reverse-mode partials of the given primitive are
// scaled by 1.1 while values stay exact. Used to check that gradient
// checking actually detects a broken derivative.
void inject_fault(std::optional<Primitive> op);
std::optional<Primitive> injected_fault();

struct ValueGrad {
  double value = 0.0;
  std::vector<double> gradient;
};

using ScalarFn = std::function<Var(std::span<const Var>)>;
using VectorFn = std::function<std::vector<Var>(std::span<const Var>)>;

// Value and gradient of a scalar function of the parameter vector. The
// function may build Jets internally; reverse mode runs over the whole
// forward-propagated computation.
ValueGrad grad(const ScalarFn& fn, std::span<const double> at);
ValueGrad grad_through_jets(const ScalarFn& fn, std::span<const double> at);

// One forward pass, one reverse sweep per output. Row i is d out_i / d at.
std::vector<std::vector<double>> jacobian(const VectorFn& fn,
                                          std::span<const double> at,
                                          std::vector<double>* values = nullptr);

// Plain evaluation through a scratch tape (no reverse sweep).
double evaluate(const ScalarFn& fn, std::span<const double> at);

// max_i |AD_i - FD_i| / max(1, |FD_i|) with central differences of step eps.
double grad_check(const ScalarFn& fn, std::span<const double> at, double eps);

}  // namespace uq::ad
