#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "uq/likelihoods.hpp"

namespace uq::test {

// u = theta * x + eps with theta ~ N(0, 1), sigma known.
struct Conjugate {
  std::vector<double> x;
  std::vector<double> u;
  double sigma = 0.1;
  double post_mean = 0.0;
  double post_std = 0.0;
};

inline Conjugate conjugate_data(std::size_t n = 20, double sigma = 0.1, double theta = 0.7,
                                std::uint64_t seed = 42) {
  Conjugate c;
  c.sigma = sigma;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  double sxx = 0.0, sxu = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    const double u = theta * x + noise(rng);
    c.x.push_back(x);
    c.u.push_back(u);
    sxx += x * x;
    sxu += x * u;
  }
  const double v = 1.0 / (1.0 + sxx / (sigma * sigma));
  c.post_mean = v * sxu / (sigma * sigma);
  c.post_std = std::sqrt(v);
  return c;
}

inline CustomSpec linear_surrogate() {
  return make_custom("linear", 1, 1, 1,
                     [](auto p, auto x) { return std::vector{x[0] * p[0]}; });
}

inline Dataset conjugate_dataset(const Conjugate& c) {
  Dataset d;
  d.inputs = c.x;
  d.targets = c.u;
  d.noise_std = {c.sigma};
  return d;
}

inline UqModel conjugate_model(const Conjugate& c, VariableSpec var) {
  UqModel m;
  m.add_process(Process{"theta", linear_surrogate(), std::move(var)});
  m.add_term(DirectTerm{"theta", conjugate_dataset(c), {}});
  return m;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Kolmogorov-Smirnov statistic of draws against a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Critical value of the one-sample KS test at alpha = 0.01.
inline double ks_critical_01(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

// Monte Carlo standard error of the mean by batch means.
inline double mcse(const std::vector<double>& v, std::size_t batches = 50) {
  const std::size_t len = v.size() / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += v[b * len + i];
    means.push_back(s / static_cast<double>(len));
  }
  return std::sqrt(var_of(means) * static_cast<double>(batches) /
                   static_cast<double>(batches - 1) / static_cast<double>(batches));
}

inline std::vector<double> column(const std::vector<double>& values, std::size_t p,
                                  std::size_t j) {
  std::vector<double> out;
  for (std::size_t i = j; i < values.size(); i += p) out.push_back(values[i]);
  return out;
}

}  // namespace uq::test
