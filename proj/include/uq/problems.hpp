#pragma once

// Problem catalog: reference solutions, noisy dataset synthesis and model
// construction for the built-in examples.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uq/likelihoods.hpp"

namespace uq {

// ---------------------------------------------------------------- ODEs

struct Trajectory {
  std::size_t dim = 0;
  std::vector<double> t;
  std::vector<double> y;  // steps x dim

  std::size_t steps() const { return t.size(); }
  std::span<const double> state(std::size_t i) const { return {y.data() + i * dim, dim}; }
  // Linear interpolation between stored steps.
  std::vector<double> at(double time) const;
};

using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dy)>;

// Classic four-stage Runge-Kutta with fixed step; the last step is
// shortened to land on t1.
Trajectory rk4_solve(const OdeRhs& rhs, std::span<const double> y0, double t0, double t1,
                     double dt);

// dx1/dt = a x2 x3, dx2/dt = b x1 x3, dx3/dt = -(a + b) x1 x2.
Trajectory ko_reference(double a, double b, std::span<const double> y0, double t0 = 0.0,
                        double t1 = 10.0, double dt = 1e-3);

// ---------------------------------------------------------------- operators

// lambda(x) = sum_k c_k sin(k pi x); u(x) = int_0^x lambda.
double antiderivative_lambda(std::span<const double> c, double x);
double antiderivative_u(std::span<const double> c, double x);

OperatorDataset antiderivative_data(std::size_t n_functions, std::size_t n_sensors,
                                    std::size_t n_outputs, std::uint64_t seed);

// Two-soliton KdV solution u = 2 d^2/dx^2 log(...).
double kdv_exact(double x, double t);

// ---------------------------------------------------------------- catalog

struct Reference {
  std::size_t dx = 1;
  std::size_t du = 1;
  std::vector<double> grid;    // N x dx
  std::vector<double> values;  // N x du

  std::size_t size() const { return values.size() / du; }
};

struct ProblemData {
  std::string id;
  std::uint64_t seed = 0;
  std::map<std::string, Dataset> datasets;
  std::optional<OperatorDataset> operator_train;
  double operator_noise = 0.0;
  Reference reference;
  std::map<std::string, double> truth;
};

struct ProblemInfo {
  std::string id;
  std::string description;
};

// Sorted by id.
const std::vector<ProblemInfo>& problem_catalog();

ProblemData make_dataset(std::string_view id, std::uint64_t seed);

struct ModelOptions {
  Family family = Family::Samplable;
  std::string surrogate = "bnn";  // bnn | fnn | generator | deeponet
  std::vector<int> hidden;        // empty: problem default
  Activation activation = Activation::Tanh;
  double prior_std = 1.0;
  double init_std = 0.01;  // variational scale at initialization
  double l2 = 0.0;
  std::string kr_prior = "normal";  // normal | halfnormal | lognormal
  std::size_t collocation = 0;      // 0: problem default
  std::filesystem::path generator;  // empty: shipped default
  LossWeights weights;
  std::uint64_t seed = 0;           // initialization of variational means
};

struct ProblemModel {
  UqModel model;
  std::string field;                 // process evaluated on the reference grid
  std::vector<std::string> constants;  // identity processes with known truth
  std::vector<double> aleatoric;     // per output of the field
};

ProblemModel build_model(const ProblemData& data, const ModelOptions& options);

std::filesystem::path data_dir();

}  // namespace uq
