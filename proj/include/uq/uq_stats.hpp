#pragma once

// Function samples, predictive summaries, evaluation metrics and post-hoc
// variance calibration.

#include <span>
#include <string_view>
#include <vector>

#include "uq/inference.hpp"

namespace uq {

// values[(j * n_points + i) * n_outputs + k] = u_j(x_i)_k
struct FunctionSamples {
  std::size_t n_samples = 0;
  std::size_t n_points = 0;
  std::size_t n_outputs = 1;
  std::size_t dx = 1;
  std::vector<double> grid;  // n_points x dx
  std::vector<double> values;

  double at(std::size_t j, std::size_t i, std::size_t k = 0) const {
    return values[(j * n_points + i) * n_outputs + k];
  }
  void validate() const;
};

// Per grid point and output, row-major n_points x n_outputs.
struct PredictiveSummary {
  std::size_t n_points = 0;
  std::size_t n_outputs = 1;
  std::vector<double> mean;
  std::vector<double> var_aleatoric;
  std::vector<double> var_epistemic;
  std::vector<double> var_total;

  std::size_t size() const { return mean.size(); }
};

// Evaluates process `key` on the grid for every posterior sample. MC
// dropout rows are evaluated under their recorded masks.
FunctionSamples function_samples(const UqModel& model, const PosteriorSamples& samples,
                                 std::string_view key, std::span<const double> grid,
                                 std::size_t dx);

// sigma_aleatoric holds one entry per output (or one entry for all).
PredictiveSummary predictive_summary(const FunctionSamples& fs,
                                     std::span<const double> sigma_aleatoric);
PredictiveSummary predictive_summary(const FunctionSamples& fs, double sigma_aleatoric);

// Mean and standard deviation (divisor M) of each column of a sample matrix.
struct ColumnMoments {
  std::vector<double> mean;
  std::vector<double> std;
};
ColumnMoments column_moments(const PosteriorSamples& samples);

double rl2e(std::span<const double> mean, std::span<const double> ref);
double mse(std::span<const double> mean, std::span<const double> ref);

// Mean over test points and outputs of -log N(u | mean, var_total).
double nll(const PredictiveSummary& summary, const Dataset& test);
double nll(const PredictiveSummary& summary, std::span<const double> targets);

struct Calibration {
  double scale = 1.0;
  PredictiveSummary summary;
};

// Rescales total std by s so the standardized residuals on the calibration
// set have unit mean square. Aleatoric and epistemic parts scale by s^2 too.
Calibration calibrate_variance(const PredictiveSummary& summary, const Dataset& calib);
Calibration calibrate_variance(const PredictiveSummary& summary, std::span<const double> targets);

PredictiveSummary rescale(const PredictiveSummary& summary, double scale);

}  // namespace uq
