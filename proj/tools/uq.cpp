#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <iostream>

#include "uq/pipeline.hpp"

namespace {

constexpr int kGradCheckFailed = 5;
constexpr double kGradTolerance = 1e-4;

int exit_code(const uq::Error& e) {
  if (dynamic_cast<const uq::ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const uq::InferenceError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const uq::IoError*>(&e) != nullptr) return 4;
  return 1;
}

void fail_line(std::string_view what) {
  std::string line(what);
  std::replace(line.begin(), line.end(), '\n', ' ');
  std::cerr << "uq: " << line << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty quantification for neural differential equations and operators"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool dump_data = false;
  auto* run = app.add_subcommand("run", "run a configured experiment");
  run->add_option("--config", config_path, "TOML run configuration")->required();
  run->add_option("--out", out_dir, "output directory (overrides [output].directory)");
  auto* seed_opt = run->add_option("--seed", seed, "run seed (overrides the config)");
  run->add_flag("--dump-data", dump_data, "write the generated datasets and stop");

  app.add_subcommand("catalog", "list problems and inference methods");

  std::string gc_config;
  std::string fault;
  auto* gc = app.add_subcommand("gradcheck", "compare reverse-mode gradients with finite differences");
  gc->add_option("--config", gc_config, "TOML run configuration")->required();
  gc->add_option("--inject-fault", fault)->group("");

  std::string problem;
  std::uint64_t data_seed = 0;
  std::string data_out;
  auto* data = app.add_subcommand("data", "generate a problem's datasets");
  data->add_option("--problem", problem)->required();
  data->add_option("--seed", data_seed)->required();
  data->add_option("--out", data_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      uq::RunConfig cfg = uq::load_run_config(config_path);
      if (seed_opt->count() > 0) {
        cfg.seed = seed;
        cfg.resolve();
      }
      const std::filesystem::path dir = out_dir.empty() ? cfg.output_dir : std::filesystem::path(out_dir);
      if (dump_data) {
        uq::write_datasets(uq::make_dataset(cfg.problem, cfg.resolved_data_seed()), dir);
        return 0;
      }
      const uq::RunResult result = uq::execute(cfg);
      uq::write_artifacts(result, dir);
      fmt::print("wrote {} samples to {}\n", result.samples.size(), dir.string());
      return 0;
    }
    if (app.got_subcommand("catalog")) {
      std::cout << uq::catalog_listing();
      return 0;
    }
    if (gc->parsed()) {
      const uq::RunConfig cfg = uq::load_run_config(gc_config);
      if (!fault.empty()) uq::ad::inject_fault(uq::ad::unary_primitive(fault));
      const uq::GradCheckReport r = uq::gradcheck(cfg);
      uq::ad::inject_fault(std::nullopt);
      fmt::print("{} {}: {} parameters, max relative error {:.3e}\n", cfg.problem, r.objective,
                 r.n_params, r.max_rel_error);
      if (!(r.max_rel_error <= kGradTolerance)) {
        fail_line(fmt::format("GradCheckFailed: error {:.3e} exceeds {:.0e}", r.max_rel_error,
                              kGradTolerance));
        return kGradCheckFailed;
      }
      return 0;
    }
    if (data->parsed()) {
      uq::write_datasets(uq::make_dataset(problem, data_seed), data_out);
      return 0;
    }
  } catch (const uq::Error& e) {
    fail_line(e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    fail_line(e.what());
    return 1;
  }
  return 0;
}
