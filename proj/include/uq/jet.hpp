#pragma once

// Truncated derivative jets along one input direction.
//
// A Jet holds raw derivatives [f, f', f'', f'''] (not Taylor-scaled). The
// scalar type is either double (plain evaluation) or ad::Var, in which case
// every coefficient lives on the active tape and parameter gradients of
// derivative-dependent quantities come from the usual reverse sweep.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uq/autodiff.hpp"

namespace uq {

inline constexpr int kMaxJetOrder = 3;

inline void check_jet_order(int order) {
  if (order < 0 || order > kMaxJetOrder) {
    throw OrderTooHigh("jet order " + std::to_string(order) + " outside 0.." +
                       std::to_string(kMaxJetOrder));
  }
}

template <class T>
class Jet {
 public:
  Jet() = default;

  // Constant jet: value with all derivatives zero.
  Jet(T value, int order) : order_(order) {
    check_jet_order(order);
    c_[0] = value;
  }

  // The independent variable itself: (x, 1, 0, 0).
  static Jet variable(T value, int order) {
    Jet j(value, order);
    if (order >= 1) j.c_[1] = T(1.0);
    return j;
  }

  int order() const { return order_; }
  T& operator[](int k) { return c_[k]; }
  const T& operator[](int k) const { return c_[k]; }
  const T& value() const { return c_[0]; }
  std::span<const T> coeffs() const { return {c_.data(), static_cast<std::size_t>(order_) + 1}; }

  Jet& operator+=(const Jet& o) { return *this = *this + o; }
  Jet& operator-=(const Jet& o) { return *this = *this - o; }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }

  friend Jet operator+(const Jet& a, const Jet& b) {
    Jet r(T(0.0), std::max(a.order_, b.order_));
    for (int k = 0; k <= r.order_; ++k) r.c_[k] = a.at(k) + b.at(k);
    return r;
  }

  friend Jet operator-(const Jet& a, const Jet& b) {
    Jet r(T(0.0), std::max(a.order_, b.order_));
    for (int k = 0; k <= r.order_; ++k) r.c_[k] = a.at(k) - b.at(k);
    return r;
  }

  friend Jet operator-(const Jet& a) {
    Jet r(T(0.0), a.order_);
    for (int k = 0; k <= r.order_; ++k) r.c_[k] = -a.c_[k];
    return r;
  }

  // Leibniz rule.
  friend Jet operator*(const Jet& a, const Jet& b) {
    const int n = std::max(a.order_, b.order_);
    Jet r(a.c_[0] * b.c_[0], n);
    if (n >= 1) r.c_[1] = a.at(1) * b.c_[0] + a.c_[0] * b.at(1);
    if (n >= 2) r.c_[2] = a.at(2) * b.c_[0] + 2.0 * (a.at(1) * b.at(1)) + a.c_[0] * b.at(2);
    if (n >= 3) {
      r.c_[3] = a.at(3) * b.c_[0] + 3.0 * (a.at(2) * b.at(1)) + 3.0 * (a.at(1) * b.at(2)) +
                a.c_[0] * b.at(3);
    }
    return r;
  }

  friend Jet operator*(const Jet& a, const T& s) {
    Jet r(T(0.0), a.order_);
    for (int k = 0; k <= r.order_; ++k) r.c_[k] = a.c_[k] * s;
    return r;
  }
  friend Jet operator*(const T& s, const Jet& a) { return a * s; }

  friend Jet operator+(const Jet& a, const T& s) {
    Jet r = a;
    r.c_[0] = a.c_[0] + s;
    return r;
  }
  friend Jet operator+(const T& s, const Jet& a) { return a + s; }
  friend Jet operator-(const Jet& a, const T& s) { return a + (-s); }
  friend Jet operator-(const T& s, const Jet& a) { return (-a) + s; }

  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
  friend Jet operator/(const Jet& a, const T& s) { return a * (T(1.0) / s); }

  // Chain rule through an outer function with derivatives outer[k] = f^(k)(g0),
  // expanded with Faa di Bruno up to third order.
  static Jet compose(const Jet& g, const std::array<T, 4>& outer) {
    const int n = g.order_;
    Jet r(outer[0], n);
    if (n >= 1) r.c_[1] = outer[1] * g.c_[1];
    if (n >= 2) {
      const T g1sq = g.c_[1] * g.c_[1];
      r.c_[2] = outer[2] * g1sq + outer[1] * g.c_[2];
      if (n >= 3) {
        r.c_[3] = outer[3] * (g1sq * g.c_[1]) + 3.0 * (outer[2] * (g.c_[1] * g.c_[2])) +
                  outer[1] * g.c_[3];
      }
    }
    return r;
  }

 private:
  T at(int k) const { return k <= order_ ? c_[k] : T(0.0); }

  std::array<T, 4> c_{};
  int order_ = 0;
};

// Outer derivative tables; entries beyond the jet order are never read.

template <class T>
Jet<T> tanh(const Jet<T>& g) {
  using std::tanh;
  const T t = tanh(g[0]);
  std::array<T, 4> d{t};
  if (g.order() >= 1) d[1] = 1.0 - t * t;
  if (g.order() >= 2) d[2] = -2.0 * (t * d[1]);
  if (g.order() >= 3) d[3] = d[1] * (6.0 * (t * t) - 2.0);
  return Jet<T>::compose(g, d);
}

template <class T>
Jet<T> sin(const Jet<T>& g) {
  using std::cos;
  using std::sin;
  const T s = sin(g[0]);
  std::array<T, 4> d{s};
  if (g.order() >= 1) {
    const T c = cos(g[0]);
    d[1] = c;
    d[2] = -s;
    d[3] = -c;
  }
  return Jet<T>::compose(g, d);
}

template <class T>
Jet<T> cos(const Jet<T>& g) {
  using std::cos;
  using std::sin;
  const T c = cos(g[0]);
  std::array<T, 4> d{c};
  if (g.order() >= 1) {
    const T s = sin(g[0]);
    d[1] = -s;
    d[2] = -c;
    d[3] = s;
  }
  return Jet<T>::compose(g, d);
}

template <class T>
Jet<T> exp(const Jet<T>& g) {
  using std::exp;
  const T e = exp(g[0]);
  return Jet<T>::compose(g, {e, e, e, e});
}

template <class T>
Jet<T> log(const Jet<T>& g) {
  using std::log;
  std::array<T, 4> d{log(g[0])};
  if (g.order() >= 1) {
    const T r = 1.0 / g[0];
    d[1] = r;
    d[2] = -(r * r);
    d[3] = 2.0 * (r * r * r);
  }
  return Jet<T>::compose(g, d);
}

template <class T>
Jet<T> sqrt(const Jet<T>& g) {
  using std::sqrt;
  const T s = sqrt(g[0]);
  std::array<T, 4> d{s};
  if (g.order() >= 1) {
    const T r = 1.0 / s;
    d[1] = 0.5 * r;
    d[2] = -0.25 * (r * r * r);
    d[3] = 0.375 * (r * r * r * r * r);
  }
  return Jet<T>::compose(g, d);
}

template <class T>
Jet<T> softplus(const Jet<T>& g) {
  using ad::sigmoid;
  using ad::softplus;
  std::array<T, 4> d{softplus(g[0])};
  if (g.order() >= 1) {
    const T s = sigmoid(g[0]);
    const T ds = s * (1.0 - s);
    d[1] = s;
    d[2] = ds;
    d[3] = ds * (1.0 - 2.0 * s);
  }
  return Jet<T>::compose(g, d);
}

template <class T>
Jet<T> relu(const Jet<T>& g) {
  using ad::relu;
  const bool on = ad::value_of(g[0]) > 0.0;
  return Jet<T>::compose(g, {relu(g[0]), T(on ? 1.0 : 0.0), T(0.0), T(0.0)});
}

template <class T>
Jet<T> pow(const Jet<T>& g, int n) {
  using ad::pow;
  std::array<T, 4> d{pow(g[0], n)};
  double falling = 1.0;
  for (int k = 1; k <= g.order(); ++k) {
    falling *= static_cast<double>(n - k + 1);
    d[k] = falling == 0.0 ? T(0.0) : falling * pow(g[0], n - k);
  }
  return Jet<T>::compose(g, d);
}

template <class T>
Jet<T> reciprocal(const Jet<T>& g) {
  const T r = 1.0 / g[0];
  std::array<T, 4> d{r};
  if (g.order() >= 1) {
    const T r2 = r * r;
    d[1] = -r2;
    d[2] = 2.0 * (r2 * r);
    d[3] = -6.0 * (r2 * r2);
  }
  return Jet<T>::compose(g, d);
}

template <class T>
Jet<T> apply(ad::Primitive op, const Jet<T>& g) {
  switch (op) {
    case ad::Primitive::Neg: return -g;
    case ad::Primitive::Tanh: return tanh(g);
    case ad::Primitive::Sin: return sin(g);
    case ad::Primitive::Cos: return cos(g);
    case ad::Primitive::Exp: return exp(g);
    case ad::Primitive::Log: return log(g);
    case ad::Primitive::Sqrt: return sqrt(g);
    case ad::Primitive::Softplus: return softplus(g);
    case ad::Primitive::Relu: return relu(g);
    default: break;
  }
  throw UnregisteredOp(std::string(ad::primitive_name(op)) + " has no jet rule");
}

using JetFn = std::function<Jet<double>(std::span<const Jet<double>>)>;

// Derivatives of fn up to `order` (1..3) along coordinate `axis` at `at`.
Jet<double> jet_eval(const JetFn& fn, std::span<const double> at, std::size_t axis, int order);

}  // namespace uq
