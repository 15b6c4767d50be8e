#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "uq/autodiff.hpp"
#include "uq/jet.hpp"
#include "uq/surrogates.hpp"

using namespace uq;
using ad::Var;

namespace {

const ad::Primitive kUnary[] = {ad::Primitive::Tanh, ad::Primitive::Sin,      ad::Primitive::Cos,
                                ad::Primitive::Exp,  ad::Primitive::Log,      ad::Primitive::Sqrt,
                                ad::Primitive::Softplus, ad::Primitive::Relu};

Var net_loss(const FnnSpec& spec, std::span<const Var> p) {
  const double xs[3][2] = {{0.1, -0.4}, {0.7, 0.2}, {-0.5, 0.9}};
  const double ys[3] = {0.3, -0.2, 0.8};
  Var loss = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Var r = fnn_values<Var>(spec, p, xs[i])[0] - ys[i];
    loss += r * r;
  }
  return loss;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST(Grad, QuadraticPlusLinear) {
  const double at[] = {2.0, 1.0};
  const auto vg = ad::grad([](std::span<const Var> t) { return t[0] * t[0] + 3.0 * t[1]; }, at);
  EXPECT_DOUBLE_EQ(vg.value, 7.0);
  ASSERT_EQ(vg.gradient.size(), 2u);
  EXPECT_DOUBLE_EQ(vg.gradient[0], 4.0);
  EXPECT_DOUBLE_EQ(vg.gradient[1], 3.0);
}

TEST(Grad, ConstantFunctionHasZeroGradient) {
  const double at[] = {0.3, -1.2, 4.0};
  const auto vg = ad::grad([](std::span<const Var>) { return Var(5.0); }, at);
  EXPECT_EQ(vg.value, 5.0);
  for (double g : vg.gradient) EXPECT_EQ(g, 0.0);
}

TEST(Grad, ValueEqualsPlainEvaluation) {
  const double at[] = {0.4, 1.7};
  auto f = [](std::span<const Var> t) { return sin(t[0]) * exp(t[1]) + log(t[1]) / t[0]; };
  EXPECT_DOUBLE_EQ(ad::grad(f, at).value, ad::evaluate(f, at));
  EXPECT_DOUBLE_EQ(ad::evaluate(f, at), std::sin(0.4) * std::exp(1.7) + std::log(1.7) / 0.4);
}

TEST(Grad, TwoLayerTanhNetMatchesFiniteDifferences) {
  const FnnSpec spec{{2, 8, 1}, Activation::Tanh, {}};
  const auto p = random_vector(spec.param_count(), 3);
  EXPECT_LE(ad::grad_check([&](std::span<const Var> t) { return net_loss(spec, t); }, p, 1e-5),
            1e-5);
}

TEST(Grad, ThreeLayerTanhNetMatchesFiniteDifferences) {
  const FnnSpec spec{{2, 10, 10, 1}, Activation::Tanh, {}};
  const auto p = random_vector(spec.param_count(), 4);
  EXPECT_LE(ad::grad_check([&](std::span<const Var> t) { return net_loss(spec, t); }, p, 1e-5),
            1e-5);
}

TEST(Grad, IsLinearInTheFunction) {
  const auto at = random_vector(3, 9);
  auto f = [](std::span<const Var> t) { return tanh(t[0] * t[1]) + t[2] * t[2]; };
  auto g = [](std::span<const Var> t) { return sin(t[0]) * softplus(t[2]) - t[1]; };
  const double a = 1.7, b = -0.6;
  const auto gf = ad::grad(f, at).gradient;
  const auto gg = ad::grad(g, at).gradient;
  const auto gc = ad::grad([&](std::span<const Var> t) { return a * f(t) + b * g(t); }, at).gradient;
  for (std::size_t i = 0; i < at.size(); ++i) EXPECT_NEAR(gc[i], a * gf[i] + b * gg[i], 1e-10);
}

TEST(Grad, NaryNodesMatchBinaryChains) {
  const auto at = random_vector(6, 5);
  auto f = [](std::span<const Var> t) {
    return ad::dot(t.subspan(0, 3), t.subspan(3, 3)) + ad::sum(t.subspan(0, 6));
  };
  auto g = [](std::span<const Var> t) {
    Var s = 0.0;
    for (int i = 0; i < 3; ++i) s += t[i] * t[i + 3];
    for (int i = 0; i < 6; ++i) s += t[i];
    return s;
  };
  const auto a = ad::grad(f, at), b = ad::grad(g, at);
  EXPECT_NEAR(a.value, b.value, 1e-14);
  for (std::size_t i = 0; i < at.size(); ++i) EXPECT_NEAR(a.gradient[i], b.gradient[i], 1e-14);
}

TEST(Grad, JacobianRows) {
  const double at[] = {1.5, -2.0};
  std::vector<double> values;
  const auto jac = ad::jacobian(
      [](std::span<const Var> t) { return std::vector<Var>{t[0] * t[1], sin(t[0]), Var(2.0)}; },
      at, &values);
  ASSERT_EQ(jac.size(), 3u);
  EXPECT_DOUBLE_EQ(values[0], -3.0);
  EXPECT_DOUBLE_EQ(jac[0][0], -2.0);
  EXPECT_DOUBLE_EQ(jac[0][1], 1.5);
  EXPECT_DOUBLE_EQ(jac[1][0], std::cos(1.5));
  EXPECT_DOUBLE_EQ(jac[1][1], 0.0);
  EXPECT_DOUBLE_EQ(jac[2][0], 0.0);
}

TEST(Grad, NonFiniteIntermediateThrows) {
  const double at[] = {-1.0};
  EXPECT_THROW(ad::grad([](std::span<const Var> t) { return log(t[0]); }, at), NonFiniteValue);
}

TEST(Primitives, LookupByName) {
  EXPECT_EQ(ad::unary_primitive("tanh"), ad::Primitive::Tanh);
  EXPECT_EQ(ad::unary_primitive("softplus"), ad::Primitive::Softplus);
  EXPECT_THROW(ad::unary_primitive("gelu"), UnregisteredOp);
  EXPECT_THROW(ad::unary_primitive("add"), UnregisteredOp);
}

TEST(GradCheck, SquareAtThree) {
  const double at[] = {3.0};
  EXPECT_LE(ad::grad_check([](std::span<const Var> t) { return t[0] * t[0]; }, at, 1e-5), 1e-8);
}

TEST(GradCheck, LinearIsMachinePrecision) {
  const double at[] = {0.5, -2.0, 7.0};
  auto f = [](std::span<const Var> t) { return 2.0 * t[0] - 3.0 * t[1] + 0.25 * t[2] + 1.0; };
  EXPECT_LE(ad::grad_check(f, at, 1e-5), 1e-9);
}

TEST(GradCheck, InjectedFaultIsDetected) {
  const double at[] = {0.3, 0.8};
  auto f = [](std::span<const Var> t) { return tanh(t[0] * t[1]) + t[0]; };
  ad::inject_fault(ad::Primitive::Tanh);
  const double err = ad::grad_check(f, at, 1e-5);
  ad::inject_fault(std::nullopt);
  EXPECT_GT(err, 1e-3);
  EXPECT_LE(ad::grad_check(f, at, 1e-5), 1e-8);
}

TEST(Jet, SinAtZero) {
  const double at[] = {0.0};
  const auto j = jet_eval([](std::span<const Jet<double>> x) { return sin(x[0]); }, at, 0, 3);
  EXPECT_NEAR(j[0], 0.0, 1e-15);
  EXPECT_NEAR(j[1], 1.0, 1e-8);
  EXPECT_NEAR(j[2], 0.0, 1e-8);
  EXPECT_NEAR(j[3], -1.0, 1e-8);
}

TEST(Jet, ExpAtZero) {
  const double at[] = {0.0};
  const auto j = jet_eval([](std::span<const Jet<double>> x) { return exp(x[0]); }, at, 0, 3);
  for (int k = 0; k <= 3; ++k) EXPECT_NEAR(j[k], 1.0, 1e-8);
}

TEST(Jet, CubeAtTwo) {
  const double at[] = {2.0};
  const auto j = jet_eval([](std::span<const Jet<double>> x) { return x[0] * x[0] * x[0]; }, at, 0, 3);
  EXPECT_NEAR(j[0], 8.0, 1e-8);
  EXPECT_NEAR(j[1], 12.0, 1e-8);
  EXPECT_NEAR(j[2], 12.0, 1e-8);
  EXPECT_NEAR(j[3], 6.0, 1e-8);
  const auto p = jet_eval([](std::span<const Jet<double>> x) { return pow(x[0], 3); }, at, 0, 3);
  for (int k = 0; k <= 3; ++k) EXPECT_NEAR(p[k], j[k], 1e-12);
}

TEST(Jet, DirectionSelectsAxis) {
  const double at[] = {0.5, 2.0};
  auto f = [](std::span<const Jet<double>> x) { return x[0] * x[0] * x[1]; };
  const auto jx = jet_eval(f, at, 0, 2);
  const auto jy = jet_eval(f, at, 1, 2);
  EXPECT_NEAR(jx[1], 2.0, 1e-14);
  EXPECT_NEAR(jx[2], 4.0, 1e-14);
  EXPECT_NEAR(jy[1], 0.25, 1e-14);
  EXPECT_NEAR(jy[2], 0.0, 1e-14);
}

TEST(Jet, OrderLimits) {
  const double at[] = {0.0};
  auto f = [](std::span<const Jet<double>> x) { return x[0]; };
  EXPECT_THROW(jet_eval(f, at, 0, 4), OrderTooHigh);
  EXPECT_THROW(jet_eval(f, at, 0, 0), OrderTooHigh);
  EXPECT_THROW(Jet<double>(1.0, 4), OrderTooHigh);
  EXPECT_THROW(jet_eval(f, at, 1, 1), DimensionMismatch);
  EXPECT_EQ(jet_eval(f, at, 0, 2).coeffs().size(), 3u);
}

TEST(Jet, OrderOneMatchesReverseModeForEveryPrimitive) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  for (ad::Primitive op : kUnary) {
    for (int rep = 0; rep < 5; ++rep) {
      const double at[] = {u(rng)};
      const auto j = jet_eval([op](std::span<const Jet<double>> x) { return apply(op, x[0]); }, at, 0, 1);
      const auto g = ad::grad([op](std::span<const Var> t) { return ad::apply(op, t[0]); }, at);
      EXPECT_NEAR(j[0], g.value, 1e-12) << ad::primitive_name(op);
      EXPECT_NEAR(j[1], g.gradient[0], 1e-10) << ad::primitive_name(op);
    }
  }
}

TEST(Jet, HigherOrdersMatchFiniteDifferences) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.3, 1.5);
  for (ad::Primitive op : kUnary) {
    if (op == ad::Primitive::Relu) continue;
    const double x0 = u(rng);
    const double at[] = {x0};
    auto f1 = [op](std::span<const Jet<double>> x) { return apply(op, x[0]); };
    const auto j = jet_eval(f1, at, 0, 3);
    const double h = 1e-3;
    auto d1 = [&](double x) {
      const double p[] = {x};
      return jet_eval(f1, p, 0, 1)[1];
    };
    // third derivative as the second difference of the exact first derivative
    const double third = (d1(x0 + h) - 2.0 * d1(x0) + d1(x0 - h)) / (h * h);
    const double second = (d1(x0 + h) - d1(x0 - h)) / (2.0 * h);
    EXPECT_NEAR(j[2], second, 1e-5 * std::max(1.0, std::abs(second))) << ad::primitive_name(op);
    EXPECT_NEAR(j[3], third, 1e-4 * std::max(1.0, std::abs(third))) << ad::primitive_name(op);
  }
}

TEST(Jet, QuotientAndComposition) {
  const double at[] = {0.7};
  const auto j = jet_eval(
      [](std::span<const Jet<double>> x) { return sin(x[0]) / (1.0 + x[0] * x[0]); }, at, 0, 1);
  const double x = 0.7;
  const double expect = (std::cos(x) * (1 + x * x) - std::sin(x) * 2 * x) / ((1 + x * x) * (1 + x * x));
  EXPECT_NEAR(j[1], expect, 1e-14);
}

TEST(GradThroughJets, SecondDerivativeSquared) {
  const double at[] = {1.0};
  auto loss = [](std::span<const Var> t) {
    const auto x = Jet<Var>::variable(Var(0.4), 2);
    const auto u = (x * x) * t[0];
    return u[2] * u[2];
  };
  const auto vg = ad::grad_through_jets(loss, at);
  EXPECT_DOUBLE_EQ(vg.value, 4.0);
  EXPECT_DOUBLE_EQ(vg.gradient[0], 8.0);
}

TEST(GradThroughJets, RandomFnnResidualMatchesFiniteDifferences) {
  const FnnSpec spec{{1, 8, 8, 1}, Activation::Tanh, {}};
  const auto p = random_vector(spec.param_count(), 31);
  auto loss = [&](std::span<const Var> t) {
    Var s = 0.0;
    for (double x0 : {-0.6, 0.1, 0.8}) {
      const Jet<Var> x[] = {Jet<Var>::variable(Var(x0), 3)};
      const auto u = fnn_forward<Var>(spec, t, x)[0];
      const Var r = 0.01 * u[2] - u[0] * u[0] * u[0] + 0.1 * u[3] - u[1];
      s += r * r;
    }
    return s;
  };
  EXPECT_LE(ad::grad_check(loss, p, 1e-5), 1e-4);
}

TEST(Tape, ConstantsStayOffTheTape) {
  ad::Tape tape;
  ad::TapeScope scope(tape);
  const Var a(2.0), b(3.0);
  const Var c = a * b + sin(a);
  EXPECT_TRUE(c.is_constant());
  EXPECT_EQ(tape.size(), 0u);
  const Var x(1.0, tape.push_leaf(1.0));
  const Var y = x * b + a;
  EXPECT_FALSE(y.is_constant());
  for (std::size_t i = 1; i < tape.size(); ++i) EXPECT_NE(tape.op(static_cast<std::int32_t>(i)), ad::Primitive::Leaf);
  const auto g = tape.gradient(y.index(), 1);
  EXPECT_DOUBLE_EQ(g[0], 3.0);
}
