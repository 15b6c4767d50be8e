#include "uq/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

namespace uq {

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::vector<std::string> parameter_names(const UqModel& model) {
  std::vector<std::string> names;
  for (const Process& p : model.processes()) {
    const std::size_t n = p.param_count();
    if (n == 1) {
      names.push_back(p.key);
    } else {
      for (std::size_t i = 0; i < n; ++i) names.push_back(fmt::format("{}.{}", p.key, i));
    }
  }
  return names;
}

// Rows [begin, end) of an n x width row-major block.
std::vector<double> take_rows(std::span<const double> v, std::size_t width, std::size_t begin,
                              std::size_t end) {
  return {v.begin() + static_cast<long>(begin * width), v.begin() + static_cast<long>(end * width)};
}

PredictiveSummary take_rows(const PredictiveSummary& s, std::size_t begin, std::size_t end) {
  PredictiveSummary out;
  out.n_points = end - begin;
  out.n_outputs = s.n_outputs;
  out.mean = take_rows(s.mean, s.n_outputs, begin, end);
  out.var_aleatoric = take_rows(s.var_aleatoric, s.n_outputs, begin, end);
  out.var_epistemic = take_rows(s.var_epistemic, s.n_outputs, begin, end);
  out.var_total = take_rows(s.var_total, s.n_outputs, begin, end);
  return out;
}

}  // namespace

std::vector<std::size_t> grid_rows(std::size_t reference_size, std::size_t grid_size) {
  std::vector<std::size_t> rows;
  if (grid_size == 0 || grid_size >= reference_size) {
    if (grid_size > reference_size) {
      throw ConfigError(fmt::format("grid_size {} exceeds the {} reference points", grid_size,
                                    reference_size));
    }
    for (std::size_t i = 0; i < reference_size; ++i) rows.push_back(i);
    return rows;
  }
  for (std::size_t i = 0; i < grid_size; ++i) {
    const double pos = grid_size == 1 ? 0.0
                                      : static_cast<double>(i) * static_cast<double>(reference_size - 1) /
                                            static_cast<double>(grid_size - 1);
    rows.push_back(static_cast<std::size_t>(std::llround(pos)));
  }
  return rows;
}

RunResult execute(const RunConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult r;
  r.config = config;
  const ProblemData data = make_dataset(config.problem, config.resolved_data_seed());
  const ProblemModel pm = build_model(data, config.model);
  r.param_names = parameter_names(pm.model);
  r.samples = run_inference(pm.model, config.inference);

  const Reference& ref = data.reference;
  const auto rows = grid_rows(ref.size(), config.grid_size);
  r.dx = ref.dx;
  for (std::size_t i : rows) {
    r.grid.insert(r.grid.end(), ref.grid.begin() + static_cast<long>(i * ref.dx),
                  ref.grid.begin() + static_cast<long>((i + 1) * ref.dx));
    r.reference.insert(r.reference.end(), ref.values.begin() + static_cast<long>(i * ref.du),
                       ref.values.begin() + static_cast<long>((i + 1) * ref.du));
  }
  const FunctionSamples fs = function_samples(pm.model, r.samples, pm.field, r.grid, r.dx);
  r.summary = predictive_summary(fs, pm.aleatoric);

  // Metrics on the evaluation rows; the tail is held out for calibration.
  const std::size_t n = rows.size();
  std::size_t n_eval = n;
  std::optional<double> scale;
  if (config.calibration) {
    const auto n_cal = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.split_fraction * static_cast<double>(n))));
    if (n_cal >= n) throw ConfigError("calibration split leaves no evaluation points");
    n_eval = n - n_cal;
    const auto cal_summary = take_rows(r.summary, n_eval, n);
    const auto cal_targets = take_rows(r.reference, ref.du, n_eval, n);
    const Calibration c = calibrate_variance(cal_summary, cal_targets);
    scale = c.scale;
    r.summary = rescale(r.summary, c.scale);
  }
  const auto eval_summary = take_rows(r.summary, 0, n_eval);
  const auto eval_ref = take_rows(r.reference, ref.du, 0, n_eval);

  nlohmann::json m;
  m["rl2e"] = rl2e(eval_summary.mean, eval_ref);
  m["mse"] = mse(eval_summary.mean, eval_ref);
  m["nll"] = nll(eval_summary, eval_ref);
  m["n_samples"] = r.samples.size();
  m["acceptance_rate"] = r.samples.acceptance_rate;
  m["calibration_scale"] = scale ? nlohmann::json(*scale) : nlohmann::json(nullptr);
  nlohmann::json params = nlohmann::json::object();
  for (const auto& key : pm.constants) {
    const auto cfs = function_samples(pm.model, r.samples, key, {}, 0);
    const auto cs = predictive_summary(cfs, 0.0);
    nlohmann::json entry;
    entry["mean"] = cs.mean[0];
    entry["std"] = std::sqrt(cs.var_epistemic[0]);
    if (data.truth.contains(key)) entry["truth"] = data.truth.at(key);
    params[key] = entry;
  }
  m["parameters"] = params;
  if (!r.samples.diverged_members.empty()) m["diverged_members"] = r.samples.diverged_members;
  m["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.metrics = std::move(m);
  return r;
}

std::string samples_csv(const PosteriorSamples& s, const std::vector<std::string>& names) {
  std::string out = fmt::format("# method={} seed={} acceptance_rate={}", method_name(s.method),
                                s.seed, num(s.acceptance_rate));
  const bool masks = !s.mask_seeds.empty();
  if (masks) out += fmt::format(" dropout_rate={}", num(s.dropout_rate));
  out += '\n';
  out += fmt::format("{}", fmt::join(names, ","));
  if (masks) out += ",mask_seed";
  out += '\n';
  for (std::size_t j = 0; j < s.size(); ++j) {
    const auto row = s.row(j);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      out += num(row[i]);
    }
    if (masks) out += fmt::format(",{}", s.mask_seeds[j]);
    out += '\n';
  }
  return out;
}

std::string predictions_csv(const RunResult& r) {
  const PredictiveSummary& s = r.summary;
  std::vector<std::string> header;
  for (std::size_t d = 0; d < r.dx; ++d) header.push_back(fmt::format("x_{}", d));
  static const char* kCols[] = {"mean", "std_aleatoric", "std_epistemic", "std_total"};
  for (std::size_t k = 0; k < s.n_outputs; ++k) {
    for (const char* c : kCols) {
      header.push_back(s.n_outputs == 1 ? std::string(c) : fmt::format("{}_{}", c, k));
    }
  }
  std::string out = fmt::format("{}\n", fmt::join(header, ","));
  for (std::size_t i = 0; i < s.n_points; ++i) {
    std::vector<std::string> cells;
    for (std::size_t d = 0; d < r.dx; ++d) cells.push_back(num(r.grid[i * r.dx + d]));
    for (std::size_t k = 0; k < s.n_outputs; ++k) {
      const std::size_t c = i * s.n_outputs + k;
      cells.push_back(num(s.mean[c]));
      cells.push_back(num(std::sqrt(s.var_aleatoric[c])));
      cells.push_back(num(std::sqrt(s.var_epistemic[c])));
      cells.push_back(num(std::sqrt(s.var_total[c])));
    }
    out += fmt::format("{}\n", fmt::join(cells, ","));
  }
  return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(fmt::format("cannot create '{}': {}", path.parent_path().string(), ec.message()));
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(fmt::format("cannot write '{}'", tmp.string()));
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) {
      f.close();
      std::filesystem::remove(tmp, ec);
      throw IoError(fmt::format("short write to '{}'", tmp.string()));
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError(fmt::format("cannot move '{}' into place", path.string()));
  }
}

void write_artifacts(const RunResult& r, const std::filesystem::path& dir) {
  // Render everything before touching the disk.
  const std::string samples = samples_csv(r.samples, r.param_names);
  const std::string predictions = predictions_csv(r);
  const std::string metrics = r.metrics.dump(2) + "\n";
  const std::string resolved = to_toml(r.config);
  write_atomic(dir / "samples.csv", samples);
  write_atomic(dir / "predictions.csv", predictions);
  write_atomic(dir / "metrics.json", metrics);
  write_atomic(dir / "config_resolved.toml", resolved);
}

std::string dataset_csv(const Dataset& d) {
  std::string out = fmt::format("# tag={} noise_std={}\n", tag_name(d.tag),
                                fmt::join(d.noise_std, ";"));
  std::vector<std::string> header;
  for (std::size_t k = 0; k < d.dx; ++k) header.push_back(fmt::format("x_{}", k));
  for (std::size_t k = 0; k < d.du; ++k) header.push_back(fmt::format("y_{}", k));
  out += fmt::format("{}\n", fmt::join(header, ","));
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<std::string> cells;
    for (double v : d.input(i)) cells.push_back(num(v));
    for (double v : d.target(i)) cells.push_back(num(v));
    out += fmt::format("{}\n", fmt::join(cells, ","));
  }
  return out;
}

void write_datasets(const ProblemData& data, const std::filesystem::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& [name, d] : data.datasets) files.emplace_back(name + ".csv", dataset_csv(d));
  if (data.operator_train) {
    const OperatorDataset& op = *data.operator_train;
    auto matrix = [](const std::vector<double>& header, const std::vector<std::vector<double>>& rows,
                     std::string_view prefix) {
      std::vector<std::string> h;
      for (std::size_t k = 0; k < header.size(); ++k) h.push_back(fmt::format("{}_{}", prefix, k));
      std::string out = fmt::format("# locations={}\n{}\n", fmt::join(header, ";"), fmt::join(h, ","));
      for (const auto& row : rows) {
        std::vector<std::string> cells;
        for (double v : row) cells.push_back(num(v));
        out += fmt::format("{}\n", fmt::join(cells, ","));
      }
      return out;
    };
    files.emplace_back("operator_sensors.csv", matrix(op.sensor_locations, op.sensor_values, "lambda"));
    files.emplace_back("operator_targets.csv", matrix(op.locations, op.targets, "u"));
  }
  Dataset ref;
  ref.dx = data.reference.dx;
  ref.du = data.reference.du;
  ref.inputs = data.reference.grid;
  ref.targets = data.reference.values;
  ref.noise_std.assign(ref.du, 0.0);
  files.emplace_back("reference.csv", dataset_csv(ref));
  for (const auto& [name, content] : files) write_atomic(dir / name, content);
}

std::string catalog_listing() {
  std::string out = "problems:\n";
  std::vector<ProblemInfo> problems = problem_catalog();
  std::sort(problems.begin(), problems.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  std::size_t width = 0;
  for (const auto& p : problems) width = std::max(width, p.id.size());
  for (const auto& p : problems) out += fmt::format("  {:<{}}  {}\n", p.id, width, p.description);
  std::vector<std::string> methods;
  for (Method m : all_methods()) methods.emplace_back(method_name(m));
  std::sort(methods.begin(), methods.end());
  out += "methods:\n";
  for (const auto& m : methods) out += fmt::format("  {}\n", m);
  return out;
}

GradCheckReport gradcheck(const RunConfig& config, double eps) {
  const ProblemData data = make_dataset(config.problem, config.resolved_data_seed());
  const ProblemModel pm = build_model(data, config.model);
  const UqModel& model = pm.model;
  std::mt19937_64 rng(config.seed);
  const ParamVector theta = initial_coords(model, rng);
  GradCheckReport report;
  report.n_params = theta.size();
  ad::ScalarFn fn;
  if (model.family() == Family::Trainable) {
    report.objective = "mse_loss";
    fn = [&model](std::span<const ad::Var> t) { return model.mse_loss<ad::Var>(t); };
  } else {
    report.objective = "log_posterior";
    fn = [&model](std::span<const ad::Var> t) { return model.log_posterior<ad::Var>(t); };
  }
  report.max_rel_error = ad::grad_check(fn, theta, eps);
  return report;
}

}  // namespace uq
