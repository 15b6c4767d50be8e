#pragma once

// End-to-end run: config -> data -> model -> inference -> summaries,
// metrics and calibration -> artifact files.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "uq/config.hpp"
#include "uq/uq_stats.hpp"

namespace uq {

struct RunResult {
  RunConfig config;
  std::vector<std::string> param_names;  // one per sample column
  PosteriorSamples samples;
  std::size_t dx = 1;
  std::vector<double> grid;     // prediction grid, n x dx
  std::vector<double> reference;  // n x du
  PredictiveSummary summary;    // calibrated when calibration is enabled
  nlohmann::json metrics;
};

RunResult execute(const RunConfig& config);

// Writes samples.csv, predictions.csv, metrics.json and config_resolved.toml.
void write_artifacts(const RunResult& result, const std::filesystem::path& dir);

std::string samples_csv(const PosteriorSamples& samples, const std::vector<std::string>& names);
std::string predictions_csv(const RunResult& result);

// Dataset files for `uq data` / `--dump-data`.
void write_datasets(const ProblemData& data, const std::filesystem::path& dir);
std::string dataset_csv(const Dataset& d);

// Sorted problem ids, then sorted method ids.
std::string catalog_listing();

struct GradCheckReport {
  std::string objective;  // log_posterior or mse_loss
  std::size_t n_params = 0;
  double max_rel_error = 0.0;
};

GradCheckReport gradcheck(const RunConfig& config, double eps = 1e-5);

// Writes to a sibling temporary file and renames it over the target.
void write_atomic(const std::filesystem::path& path, std::string_view content);

// Prediction grid rows: n evenly spaced rows of the reference (all when 0).
std::vector<std::size_t> grid_rows(std::size_t reference_size, std::size_t grid_size);

}  // namespace uq
