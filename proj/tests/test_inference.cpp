#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "support.hpp"
#include "uq/inference.hpp"
#include "uq/problems.hpp"
#include "uq/uq_stats.hpp"

using namespace uq;

namespace {

// log N(0, I) in d dimensions, unnormalized.
LogDensity std_gaussian(std::size_t d) {
  return {d, [](std::span<const double> x, std::span<double> g) {
            double s = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
              s += x[i] * x[i];
              g[i] = -x[i];
            }
            return -0.5 * s;
          }};
}

LogDensity flat_box(std::size_t d, double half_width) {
  return {d, [half_width](std::span<const double> x, std::span<double> g) {
            for (std::size_t i = 0; i < x.size(); ++i) {
              g[i] = 0.0;
              if (std::abs(x[i]) > half_width) return kLogZero;
            }
            return 0.0;
          }};
}

double hamiltonian(const LogDensity& t, std::span<const double> q, std::span<const double> p) {
  std::vector<double> g(q.size());
  double k = 0.0;
  for (double v : p) k += 0.5 * v * v;
  return -t.eval(q, g) + k;
}

ProblemModel sine_model(Family family, std::uint64_t seed = 0) {
  ModelOptions o;
  o.family = family;
  o.surrogate = family == Family::Samplable ? "bnn" : "fnn";
  o.seed = seed;
  return build_model(make_dataset("sine_regression", 1), o);
}

InferenceConfig base_config(Method m, std::uint64_t seed = 1) {
  InferenceConfig c;
  c.method = m;
  c.seed = seed;
  c.threads = 1;
  return c;
}

std::vector<double> training_mse(const UqModel& m, const PosteriorSamples& s) {
  std::vector<double> out;
  for (std::size_t j = 0; j < s.size(); ++j) out.push_back(m.mse_loss<double>(s.row(j)));
  return out;
}

}  // namespace

TEST(Leapfrog, SingleStepIdentity) {
  const auto t = std_gaussian(3);
  const double q[] = {0.3, -1.2, 0.8};
  const double p[] = {1.0, 0.5, -0.7};
  const double eps = 0.1;
  const auto out = leapfrog(t.eval, q, p, eps, 1);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(out.position[i], q[i] + eps * p[i] + 0.5 * eps * eps * (-q[i]), 1e-15);
  }
}

TEST(Leapfrog, Reversible) {
  const auto t = std_gaussian(4);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> q(4), p(4);
    for (int i = 0; i < 4; ++i) {
      q[i] = g(rng);
      p[i] = g(rng);
    }
    auto fwd = leapfrog(t.eval, q, p, 0.05, 25);
    for (double& v : fwd.momentum) v = -v;
    const auto back = leapfrog(t.eval, fwd.position, fwd.momentum, 0.05, 25);
    for (int i = 0; i < 4; ++i) {
      EXPECT_NEAR(back.position[i], q[i], 1e-9);
      EXPECT_NEAR(back.momentum[i], -p[i], 1e-9);
    }
  }
}

TEST(Leapfrog, EnergyDriftIsSmall) {
  const auto t = std_gaussian(2);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 20; ++rep) {
    const double q[] = {g(rng), g(rng)};
    const double p[] = {g(rng), g(rng)};
    const auto out = leapfrog(t.eval, q, p, 0.1, 10);
    EXPECT_LE(std::abs(hamiltonian(t, out.position, out.momentum) - hamiltonian(t, q, p)), 1e-2);
  }
}

TEST(Leapfrog, LeavingSupportThrows) {
  const auto t = flat_box(1, 1.0);
  const double q[] = {0.9};
  const double p[] = {5.0};
  EXPECT_THROW(leapfrog(t.eval, q, p, 0.1, 5), NonFiniteValue);
}

TEST(Hmc, TinyStepAcceptsEverything) {
  auto cfg = base_config(Method::Hmc);
  cfg.step_size = 1e-6;
  cfg.leapfrog_steps = 1;
  cfg.n_samples = 2000;
  const auto s = hmc_sample(std_gaussian(2), {0.5, -0.5}, cfg);
  EXPECT_GE(s.acceptance_rate, 0.999);
}

TEST(Hmc, KolmogorovSmirnovOnStandardGaussian) {
  auto cfg = base_config(Method::Hmc, 5);
  cfg.step_size = 0.3;
  cfg.leapfrog_steps = 5;
  cfg.n_samples = 10000;
  const auto s = hmc_sample(std_gaussian(1), {0.0}, cfg);
  ASSERT_EQ(s.size(), 10000u);
  EXPECT_LE(test::ks_statistic(s.values, test::normal_cdf), test::ks_critical_01(s.size()));
}

TEST(Hmc, AcceptanceNonIncreasingInStepSize) {
  double last = 1.0;
  for (double eps : {0.1, 0.4, 0.8, 1.2, 1.6}) {
    auto cfg = base_config(Method::Hmc, 6);
    cfg.step_size = eps;
    cfg.leapfrog_steps = 1;
    cfg.n_samples = 5000;
    const auto s = hmc_sample(std_gaussian(2), {0.0, 0.0}, cfg);
    EXPECT_LE(s.acceptance_rate, last + 0.01) << "eps " << eps;
    last = s.acceptance_rate;
  }
}

TEST(Hmc, HugeStepRaisesZeroAcceptance) {
  auto cfg = base_config(Method::Hmc);
  cfg.step_size = 50.0;
  cfg.leapfrog_steps = 3;
  cfg.n_samples = 200;
  const LogDensity narrow{1, [](std::span<const double> x, std::span<double> g) {
                            g[0] = -1e4 * x[0];
                            return -0.5e4 * x[0] * x[0];
                          }};
  EXPECT_THROW(hmc_sample(narrow, {0.0}, cfg), ZeroAcceptance);
}

TEST(Hmc, Deterministic) {
  auto cfg = base_config(Method::Hmc, 9);
  cfg.n_samples = 300;
  cfg.step_size = 0.2;
  cfg.leapfrog_steps = 5;
  const auto a = hmc_sample(std_gaussian(3), {0.1, 0.2, 0.3}, cfg);
  const auto b = hmc_sample(std_gaussian(3), {0.1, 0.2, 0.3}, cfg);
  EXPECT_EQ(a.values, b.values);
  cfg.seed = 10;
  EXPECT_NE(hmc_sample(std_gaussian(3), {0.1, 0.2, 0.3}, cfg).values, a.values);
}

TEST(Hmc, RequiresSamplableModel) {
  const auto pm = sine_model(Family::Trainable);
  EXPECT_THROW(hmc_run(pm.model, base_config(Method::Hmc)), FamilyMismatch);
}

TEST(Mala, FlatTargetAcceptsInsideSupport) {
  auto cfg = base_config(Method::Mala);
  cfg.step_size = 0.01;
  cfg.n_samples = 2000;
  const auto s = mala_sample(flat_box(2, 5.0), {0.0, 0.0}, cfg);
  EXPECT_EQ(s.acceptance_rate, 1.0);
}

TEST(Mala, GaussianMomentsWithinMcse) {
  auto cfg = base_config(Method::Mala, 2);
  cfg.step_size = 0.9;
  cfg.n_samples = 20000;
  const auto s = mala_sample(std_gaussian(1), {0.0}, cfg);
  const double se = test::mcse(s.values);
  EXPECT_LE(std::abs(test::mean_of(s.values)), 3.0 * se);
  std::vector<double> sq;
  for (double v : s.values) sq.push_back(v * v);
  EXPECT_LE(std::abs(test::mean_of(sq) - 1.0), 3.0 * test::mcse(sq));
}

TEST(Mala, AcceptanceRisesAsStepShrinks) {
  std::vector<double> rates;
  for (double eps : {0.5, 0.1, 0.01}) {
    auto cfg = base_config(Method::Mala, 3);
    cfg.step_size = eps;
    cfg.n_samples = 4000;
    // a stiff-ish target so the trend is visible
    const LogDensity t{1, [](std::span<const double> x, std::span<double> g) {
                         g[0] = -16.0 * x[0];
                         return -8.0 * x[0] * x[0];
                       }};
    rates.push_back(mala_sample(t, {0.0}, cfg).acceptance_rate);
  }
  EXPECT_LT(rates[0], rates[1]);
  EXPECT_LT(rates[1], rates[2]);
  EXPECT_GT(rates[2], 0.99);
}

TEST(Ld, FlatTargetIsGaussianRandomWalk) {
  auto cfg = base_config(Method::Ld, 4);
  cfg.step_size = 0.05;
  cfg.n_samples = 20000;
  cfg.burn_in = 0;
  const auto s = ld_sample(flat_box(1, 1e9), {0.0}, cfg);
  std::vector<double> steps;
  for (std::size_t i = 1; i < s.values.size(); ++i) steps.push_back(s.values[i] - s.values[i - 1]);
  EXPECT_NEAR(test::var_of(steps) / (0.05 * 0.05), 1.0, 0.05);
  EXPECT_NEAR(test::mean_of(steps), 0.0, 4.0 * 0.05 / std::sqrt(20000.0));
}

TEST(Ld, GaussianVariance) {
  auto cfg = base_config(Method::Ld, 5);
  cfg.step_size = 0.05;
  cfg.n_samples = 4000000;
  cfg.burn_in = 10000;
  const auto s = ld_sample(std_gaussian(1), {0.0}, cfg);
  EXPECT_NEAR(test::var_of(s.values), 1.0, 0.1);
}

TEST(Ld, KeepsEveryIterate) {
  auto cfg = base_config(Method::Ld, 6);
  cfg.step_size = 0.1;
  cfg.n_samples = 500;
  const auto s = ld_sample(std_gaussian(2), {0.0, 0.0}, cfg);
  EXPECT_EQ(s.size(), 500u);
  for (std::size_t j = 1; j < s.size(); ++j) EXPECT_NE(s.row(j)[0], s.row(j - 1)[0]);
}

TEST(Conjugate, SamplersRecoverPosterior) {
  const auto c = test::conjugate_data();
  const auto m = test::conjugate_model(c, VariableSpec::samplable());
  for (Method method : {Method::Hmc, Method::Mala}) {
    auto cfg = base_config(method, 7);
    cfg.n_samples = 4000;
    cfg.step_size = method == Method::Hmc ? 0.01 : 0.02;
    cfg.leapfrog_steps = 10;
    const auto s = run_inference(m, cfg);
    const auto mom = column_moments(s);
    EXPECT_NEAR(mom.mean[0], c.post_mean, 0.05 * std::abs(c.post_mean)) << method_name(method);
    EXPECT_NEAR(mom.std[0], c.post_std, 0.15 * c.post_std) << method_name(method);
  }
}

TEST(Mfvi, ConjugatePosterior) {
  const auto c = test::conjugate_data();
  const auto m = test::conjugate_model(
      c, VariableSpec::variational_family(NormalPrior{}, {{0.0}, {std::log(std::expm1(0.1))}}));
  auto cfg = base_config(Method::Mfvi, 8);
  cfg.iterations = 6000;
  cfg.learning_rate = 0.01;
  cfg.n_samples = 1000;
  const auto r = mfvi_run(m, cfg);
  const double mean = r.posterior[0].mean[0];
  const double std = ad::softplus(r.posterior[0].rho[0]);
  EXPECT_NEAR(mean, c.post_mean, 0.05 * std::abs(c.post_mean));
  EXPECT_NEAR(std, c.post_std, 0.15 * c.post_std);
  EXPECT_EQ(r.samples.size(), 1000u);

  // the ELBO improves over training
  const auto& tr = r.samples.trace;
  ASSERT_EQ(tr.size(), cfg.iterations);
  auto window = [&](std::size_t start) {
    double s = 0.0;
    for (std::size_t i = start; i < start + 100; ++i) s += tr[i];
    return s / 100.0;
  };
  EXPECT_GT(window(tr.size() - 100), window(0));
  double worst_drop = 0.0;
  for (std::size_t b = 100; b + 100 <= tr.size(); b += 100) {
    worst_drop = std::max(worst_drop, window(b - 100) - window(b));
  }
  EXPECT_LT(worst_drop, 0.05 * (window(tr.size() - 100) - window(0)));
}

TEST(Mfvi, ZeroDataReturnsPrior) {
  UqModel m;
  const NormalPrior prior{0.5, 2.0};
  m.add_process(Process{"a", IdentitySpec{3},
                        VariableSpec::variational_family(prior, {{0.0, 1.0, -1.0}, {0.0, 0.0, 0.0}})});
  auto cfg = base_config(Method::Mfvi, 9);
  cfg.iterations = 4000;
  cfg.learning_rate = 0.02;
  cfg.n_samples = 10;
  const auto r = mfvi_run(m, cfg);
  EXPECT_LE(kl_to_prior(VariableSpec::variational_family(prior, r.posterior[0])), 1e-3);
}

TEST(Mcd, ZeroRateGivesIdenticalSamples) {
  const auto pm = sine_model(Family::Trainable);
  auto cfg = base_config(Method::Mcd, 10);
  cfg.dropout_rate = 0.0;
  cfg.iterations = 300;
  cfg.n_samples = 20;
  const auto s = mcd_run(pm.model, cfg);
  const auto grid = make_dataset("sine_regression", 1).reference.grid;
  const auto fs = function_samples(pm.model, s, "u", grid, 1);
  const auto sum = predictive_summary(fs, 0.05);
  for (double v : sum.var_epistemic) EXPECT_EQ(v, 0.0);
}

TEST(Mcd, PositiveRateGivesEpistemicVarianceEverywhere) {
  const auto pm = sine_model(Family::Trainable);
  auto cfg = base_config(Method::Mcd, 11);
  cfg.dropout_rate = 0.05;
  cfg.iterations = 2000;
  cfg.learning_rate = 0.005;
  cfg.n_samples = 50;
  const auto s = mcd_run(pm.model, cfg);
  EXPECT_EQ(s.mask_seeds.size(), 50u);
  const auto grid = make_dataset("sine_regression", 1).reference.grid;
  const auto sum = predictive_summary(function_samples(pm.model, s, "u", grid, 1), 0.05);
  for (double v : sum.var_epistemic) EXPECT_GT(v, 0.0);
}

TEST(Dens, SingleMemberHasNoEpistemicVariance) {
  const auto pm = sine_model(Family::Trainable);
  auto cfg = base_config(Method::Dens, 12);
  cfg.ensemble_size = 1;
  cfg.iterations = 200;
  const auto s = dens_run(pm.model, cfg);
  ASSERT_EQ(s.size(), 1u);
  const auto grid = make_dataset("sine_regression", 1).reference.grid;
  const auto sum = predictive_summary(function_samples(pm.model, s, "u", grid, 1), 0.05);
  for (std::size_t i = 0; i < sum.size(); ++i) {
    EXPECT_EQ(sum.var_epistemic[i], 0.0);
    EXPECT_EQ(sum.var_total[i], sum.var_aleatoric[i]);
  }
}

TEST(Dens, MembersDistinctAndFitTheData) {
  const auto pm = sine_model(Family::Trainable);
  auto cfg = base_config(Method::Dens, 13);
  cfg.ensemble_size = 5;
  cfg.iterations = 3000;
  cfg.learning_rate = 0.01;
  const auto s = dens_run(pm.model, cfg);
  ASSERT_EQ(s.size(), 5u);
  std::set<std::vector<double>> rows;
  for (std::size_t j = 0; j < 5; ++j) rows.emplace(s.row(j).begin(), s.row(j).end());
  EXPECT_EQ(rows.size(), 5u);
  for (double mse : training_mse(pm.model, s)) EXPECT_LE(mse, 1e-3);
  EXPECT_TRUE(s.diverged_members.empty());
}

TEST(Sens, CosineScheduleReachesZeroAtCycleEnd) {
  EXPECT_DOUBLE_EQ(cyclic_cosine_lr(0.1, 0, 1000), 0.1);
  EXPECT_NEAR(cyclic_cosine_lr(0.1, 1000, 1000), 0.0, 1e-18);
  EXPECT_NEAR(cyclic_cosine_lr(0.1, 500, 1000), 0.05, 1e-15);
}

TEST(Sens, OneSnapshotPerCycle) {
  const auto pm = sine_model(Family::Trainable);
  auto cfg = base_config(Method::Sens, 14);
  cfg.iterations = 5000;
  cfg.cycles = 5;
  cfg.learning_rate = 0.01;
  const auto s = sens_run(pm.model, cfg);
  ASSERT_EQ(s.size(), 5u);
  std::set<std::vector<double>> rows;
  for (std::size_t j = 0; j < 5; ++j) rows.emplace(s.row(j).begin(), s.row(j).end());
  EXPECT_EQ(rows.size(), 5u);
}

TEST(Laplace, ConjugateIsExact) {
  const auto c = test::conjugate_data();
  const auto m = test::conjugate_model(c, VariableSpec::trainable());
  auto cfg = base_config(Method::La, 15);
  cfg.iterations = 5000;
  cfg.learning_rate = 0.05;
  cfg.n_samples = 10000;
  const auto r = la_fit(m, cfg);
  EXPECT_NEAR(r.mode[0], c.post_mean, 1e-4);
  EXPECT_NEAR(1.0 / std::sqrt(r.precision[0]), c.post_std, 0.05 * c.post_std);
  const auto mom = column_moments(r.samples);
  const double sd = 1.0 / std::sqrt(r.precision[0]);
  EXPECT_LE(std::abs(mom.mean[0] - r.mode[0]), 4.0 * sd / 100.0);
  EXPECT_LE(std::abs(mom.std[0] - sd), 4.0 * sd / std::sqrt(2.0 * 10000));
}

TEST(Laplace, ZeroDataGivesPriorCovariance) {
  UqModel m;
  m.add_process(Process{"a", IdentitySpec{4}, VariableSpec::trainable()});
  auto cfg = base_config(Method::La, 16);
  cfg.iterations = 3000;
  cfg.learning_rate = 0.05;
  cfg.n_samples = 10;
  const auto r = la_fit(m, cfg);
  for (double h : r.precision) EXPECT_NEAR(h, 1.0, 1e-12);
  for (double v : r.mode) EXPECT_NEAR(v, 0.0, 1e-3);
}

TEST(AllMethods, ShapesAndFiniteness) {
  for (Method method : all_methods()) {
    const auto pm = sine_model(method_family(method), 2);
    auto cfg = base_config(method, 17);
    cfg.n_samples = 40;
    cfg.iterations = 200;
    cfg.ensemble_size = 3;
    cfg.cycles = 4;
    cfg.step_size = 0.002;
    cfg.leapfrog_steps = 5;
    const auto s = run_inference(pm.model, cfg);
    const std::size_t m = method == Method::Dens ? 3 : method == Method::Sens ? 4 : 40;
    EXPECT_EQ(s.size(), m) << method_name(method);
    EXPECT_EQ(s.n_params, pm.model.param_count()) << method_name(method);
    EXPECT_EQ(s.values.size(), m * pm.model.param_count());
    for (double v : s.values) ASSERT_TRUE(std::isfinite(v)) << method_name(method);
    EXPECT_EQ(s.method, method);
  }
}

TEST(AllMethods, BitIdenticalReruns) {
  for (Method method : all_methods()) {
    const auto pm = sine_model(method_family(method), 3);
    auto cfg = base_config(method, 18);
    cfg.n_samples = 20;
    cfg.iterations = 100;
    cfg.ensemble_size = 2;
    cfg.cycles = 2;
    cfg.step_size = 0.002;
    cfg.leapfrog_steps = 5;
    const auto a = run_inference(pm.model, cfg);
    const auto b = run_inference(pm.model, cfg);
    EXPECT_EQ(a.values, b.values) << method_name(method);
  }
}

TEST(Config, Validation) {
  InferenceConfig c;
  c.step_size = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = InferenceConfig{};
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = InferenceConfig{};
  c.n_samples = 100;
  c.burn_in.reset();
  EXPECT_EQ(c.resolved_burn_in(), 25u);
  EXPECT_THROW(parse_method("nuts"), ConfigError);
  for (Method m : all_methods()) EXPECT_EQ(parse_method(method_name(m)), m);
}
