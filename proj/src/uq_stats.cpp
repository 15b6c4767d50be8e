#include "uq/uq_stats.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace uq {

void FunctionSamples::validate() const {
  if (values.size() != n_samples * n_points * n_outputs) {
    throw ShapeMismatch("function sample matrix has the wrong size");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteValue("non-finite function sample");
  }
}

FunctionSamples function_samples(const UqModel& model, const PosteriorSamples& samples,
                                 std::string_view key, std::span<const double> grid,
                                 std::size_t dx) {
  if (samples.size() == 0) throw EmptySamples("no posterior samples");
  const Process& proc = model.process(key);
  FunctionSamples fs;
  fs.n_samples = samples.size();
  fs.dx = dx;
  fs.n_points = dx == 0 ? 1 : grid.size() / dx;
  fs.n_outputs = output_dim(proc.surrogate);
  fs.grid.assign(grid.begin(), grid.end());
  fs.values.reserve(fs.n_samples * fs.n_points * fs.n_outputs);

  const bool dropout = !samples.mask_seeds.empty();
  for (std::size_t j = 0; j < fs.n_samples; ++j) {
    MaskSet masks;
    if (dropout) masks = dropout_masks(model, samples.dropout_rate, samples.mask_seeds[j]);
    const MaskSet* m = dropout ? &masks : nullptr;
    for (std::size_t i = 0; i < fs.n_points; ++i) {
      const auto x = dx == 0 ? std::span<const double>() : grid.subspan(i * dx, dx);
      const auto u = model.predict<double>(key, samples.row(j), x, m);
      fs.values.insert(fs.values.end(), u.begin(), u.end());
    }
  }
  fs.validate();
  return fs;
}

PredictiveSummary predictive_summary(const FunctionSamples& fs,
                                     std::span<const double> sigma_aleatoric) {
  if (fs.n_samples == 0) throw EmptySamples("predictive summary of zero samples");
  if (sigma_aleatoric.size() != 1 && sigma_aleatoric.size() != fs.n_outputs) {
    throw DimensionMismatch(fmt::format("{} aleatoric stds for {} outputs", sigma_aleatoric.size(),
                                        fs.n_outputs));
  }
  for (double s : sigma_aleatoric) {
    if (!(s >= 0.0)) throw ConfigError("aleatoric std must be non-negative");
  }
  const std::size_t n = fs.n_points * fs.n_outputs;
  const double m = static_cast<double>(fs.n_samples);
  PredictiveSummary out;
  out.n_points = fs.n_points;
  out.n_outputs = fs.n_outputs;
  out.mean.assign(n, 0.0);
  out.var_epistemic.assign(n, 0.0);
  out.var_aleatoric.resize(n);
  out.var_total.resize(n);
  // running mean: exact when every sample agrees
  for (std::size_t j = 0; j < fs.n_samples; ++j) {
    const double w = 1.0 / static_cast<double>(j + 1);
    for (std::size_t c = 0; c < n; ++c) out.mean[c] += (fs.values[j * n + c] - out.mean[c]) * w;
  }
  for (std::size_t j = 0; j < fs.n_samples; ++j) {
    for (std::size_t c = 0; c < n; ++c) {
      const double d = fs.values[j * n + c] - out.mean[c];
      out.var_epistemic[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    const double s = sigma_aleatoric.size() == 1 ? sigma_aleatoric[0]
                                                 : sigma_aleatoric[c % fs.n_outputs];
    out.var_epistemic[c] /= m;
    out.var_aleatoric[c] = s * s;
    out.var_total[c] = out.var_aleatoric[c] + out.var_epistemic[c];
  }
  return out;
}

PredictiveSummary predictive_summary(const FunctionSamples& fs, double sigma_aleatoric) {
  return predictive_summary(fs, std::span<const double>(&sigma_aleatoric, 1));
}

ColumnMoments column_moments(const PosteriorSamples& samples) {
  const std::size_t m = samples.size();
  if (m == 0) throw EmptySamples("moments of zero samples");
  ColumnMoments out{std::vector<double>(samples.n_params, 0.0),
                    std::vector<double>(samples.n_params, 0.0)};
  for (std::size_t j = 0; j < m; ++j) {
    const double w = 1.0 / static_cast<double>(j + 1);
    for (std::size_t i = 0; i < samples.n_params; ++i) out.mean[i] += (samples.row(j)[i] - out.mean[i]) * w;
  }
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < samples.n_params; ++i) {
      const double d = samples.row(j)[i] - out.mean[i];
      out.std[i] += d * d;
    }
  }
  for (double& v : out.std) v = std::sqrt(v / static_cast<double>(m));
  return out;
}

double rl2e(std::span<const double> mean, std::span<const double> ref) {
  if (mean.size() != ref.size()) throw ShapeMismatch("rl2e operands differ in length");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    num += (mean[i] - ref[i]) * (mean[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  if (!(den > 0.0)) throw ZeroReference("reference has zero norm");
  return std::sqrt(num) / std::sqrt(den);
}

double mse(std::span<const double> mean, std::span<const double> ref) {
  if (mean.size() != ref.size()) throw ShapeMismatch("mse operands differ in length");
  if (ref.empty()) throw EmptySamples("mse of an empty vector");
  double acc = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) acc += (mean[i] - ref[i]) * (mean[i] - ref[i]);
  return acc / static_cast<double>(ref.size());
}

double nll(const PredictiveSummary& summary, std::span<const double> targets) {
  if (targets.size() != summary.size()) {
    throw ShapeMismatch(fmt::format("{} targets for {} predictions", targets.size(),
                                    summary.size()));
  }
  if (targets.empty()) throw EmptySamples("nll over an empty test set");
  double acc = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double v = summary.var_total[i];
    if (!(v > 0.0)) throw ZeroVariance(fmt::format("total variance {} at point {}", v, i));
    const double r = targets[i] - summary.mean[i];
    acc += 0.5 * std::log(2.0 * std::numbers::pi * v) + 0.5 * r * r / v;
  }
  return acc / static_cast<double>(targets.size());
}

double nll(const PredictiveSummary& summary, const Dataset& test) {
  return nll(summary, std::span<const double>(test.targets));
}

PredictiveSummary rescale(const PredictiveSummary& summary, double scale) {
  PredictiveSummary out = summary;
  const double s2 = scale * scale;
  for (std::size_t c = 0; c < out.size(); ++c) {
    out.var_aleatoric[c] *= s2;
    out.var_epistemic[c] *= s2;
    out.var_total[c] = out.var_aleatoric[c] + out.var_epistemic[c];
  }
  return out;
}

Calibration calibrate_variance(const PredictiveSummary& summary, std::span<const double> targets) {
  if (targets.empty()) throw EmptyCalibrationSet("no calibration points");
  if (targets.size() != summary.size()) {
    throw ShapeMismatch(fmt::format("{} calibration targets for {} predictions", targets.size(),
                                    summary.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double v = summary.var_total[i];
    if (!(v > 0.0)) throw ZeroVariance(fmt::format("total variance {} at point {}", v, i));
    const double r = targets[i] - summary.mean[i];
    acc += r * r / v;
  }
  Calibration out;
  out.scale = std::sqrt(acc / static_cast<double>(targets.size()));
  out.summary = rescale(summary, out.scale);
  return out;
}

Calibration calibrate_variance(const PredictiveSummary& summary, const Dataset& calib) {
  return calibrate_variance(summary, std::span<const double>(calib.targets));
}

}  // namespace uq
