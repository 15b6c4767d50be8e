#include "uq/likelihoods.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace uq {

using ad::Var;

namespace {
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
}

std::string_view tag_name(DataTag t) {
  switch (t) {
    case DataTag::U: return "u";
    case DataTag::F: return "f";
    case DataTag::B: return "b";
    case DataTag::Lambda: return "lambda";
  }
  return "u";
}

double LossWeights::of(DataTag t) const {
  switch (t) {
    case DataTag::U: return u;
    case DataTag::F: return f;
    case DataTag::B: return b;
    case DataTag::Lambda: return lambda;
  }
  return u;
}

void Dataset::validate(bool bayesian) const {
  if (du == 0) throw ShapeMismatch("dataset has no target components");
  if (targets.size() % du != 0) throw ShapeMismatch("targets are not a multiple of du");
  if (dx > 0 && (inputs.size() % dx != 0 || inputs.size() / dx != targets.size() / du)) {
    throw ShapeMismatch("dataset inputs and targets are not row-aligned");
  }
  if (dx == 0 && !inputs.empty()) throw ShapeMismatch("dx = 0 dataset with inputs");
  if (noise_std.size() != du) throw ShapeMismatch("noise_std needs one entry per component");
  if (bayesian) {
    for (double s : noise_std) {
      if (!(s > 0.0)) throw ShapeMismatch("noise_std must be positive for likelihoods");
    }
  }
}

void OperatorDataset::validate() const {
  const std::size_t n_sensors = sensor_locations.size();
  if (targets.size() != sensor_values.size()) {
    throw ShapeMismatch("operator dataset: inputs and targets differ in count");
  }
  for (const auto& v : sensor_values) {
    if (v.size() != n_sensors) throw RaggedSensors("input functions use different sensor sets");
  }
  for (const auto& t : targets) {
    if (t.size() != locations.size()) throw ShapeMismatch("operator dataset: ragged targets");
  }
}

// ---------------------------------------------------------------- UqModel

void UqModel::add_process(Process p) {
  for (const auto& q : processes_) {
    if (q.key == p.key) throw DuplicateProcessKey("'" + p.key + "' already defined");
  }
  p.variable.validate(p.param_count());
  offsets_.push_back(total_params_);
  total_params_ += p.param_count();
  processes_.push_back(std::move(p));
}

void UqModel::add_term(LikelihoodTerm term) { terms_.push_back(std::move(term)); }

Family UqModel::family() const {
  if (processes_.empty()) throw FamilyMismatch("model has no processes");
  return processes_.front().variable.family;
}

std::size_t UqModel::index_of(std::string_view key) const {
  for (std::size_t i = 0; i < processes_.size(); ++i) {
    if (processes_[i].key == key) return i;
  }
  throw UnknownProcessKey("'" + std::string(key) + "'");
}

std::size_t UqModel::offset(std::string_view key) const { return offsets_[index_of(key)]; }

const Process& UqModel::process(std::string_view key) const { return processes_[index_of(key)]; }

void UqModel::validate() const {
  const Family fam = family();
  for (const auto& p : processes_) {
    if (p.variable.family != fam) {
      throw FamilyMismatch(fmt::format("process '{}' is {}, model is {}", p.key,
                                       family_name(p.variable.family), family_name(fam)));
    }
  }
  for (const auto& term : terms_) {
    std::visit(
        [&](const auto& t) {
          using Term = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<Term, DirectTerm>) {
            const Process& p = process(t.key);
            t.data.validate(fam != Family::Trainable);
            for (int c : t.components) {
              if (c < 0 || c >= output_dim(p.surrogate)) {
                throw DimensionMismatch("direct term component out of range");
              }
            }
            if (t.components.empty() &&
                t.data.du != static_cast<std::size_t>(output_dim(p.surrogate))) {
              throw DimensionMismatch("direct term target width differs from surrogate output");
            }
          } else if constexpr (std::is_same_v<Term, ResidualTerm>) {
            for (const auto& key : t.fn.reads) (void)index_of(key);
            t.data.validate(fam != Family::Trainable);
            if (t.data.du != t.fn.out_dim) {
              throw DimensionMismatch("residual output width differs from its dataset");
            }
          } else {
            if (!std::holds_alternative<DeepONetSpec>(process(t.key).surrogate)) {
              throw FamilyMismatch("operator terms need a DeepONet process");
            }
            t.data.validate();
          }
        },
        term);
  }
}

template <class T>
std::vector<T> UqModel::process_params(std::size_t index, std::span<const T> theta) const {
  if (theta.size() != total_params_) {
    throw DimensionMismatch(
        fmt::format("model has {} parameters, got {}", total_params_, theta.size()));
  }
  const Process& p = processes_[index];
  return p.to_surrogate<T>(theta.subspan(offsets_[index], p.param_count()));
}

template <class T>
T UqModel::log_prior(std::span<const T> theta) const {
  if (theta.size() != total_params_) {
    throw DimensionMismatch(
        fmt::format("model has {} parameters, got {}", total_params_, theta.size()));
  }
  T acc(0.0);
  for (std::size_t i = 0; i < processes_.size(); ++i) {
    const Process& p = processes_[i];
    if (p.variable.family == Family::Trainable) {
      throw FamilyMismatch("log_prior on trainable process '" + p.key + "'");
    }
    const T lp = p.log_prior_coords<T>(theta.subspan(offsets_[i], p.param_count()));
    if (!std::isfinite(ad::value_of(lp))) return T(kLogZero);
    acc = acc + lp;
  }
  return acc;
}

namespace {

const DropoutMask* mask_for(const MaskSet* masks, std::size_t index) {
  if (masks == nullptr || index >= masks->size() || !(*masks)[index]) return nullptr;
  return &*(*masks)[index];
}

template <class T>
std::vector<T> residual_at(const ResidualFn& fn, const UqModel& model,
                           const std::vector<std::vector<T>>& params, std::span<const double> x,
                           const MaskSet* masks) {
  struct Entry {
    std::string_view key;
    std::size_t axis;
    std::vector<Jet<T>> jets;
  };
  std::vector<Entry> cache;
  cache.reserve(fn.reads.size() * fn.axes.size());
  for (const auto& key : fn.reads) {
    const std::size_t p = model.index_of(key);
    for (std::size_t axis : fn.axes) {
      cache.push_back({key, axis,
                       surrogate_eval_jets<T>(model.processes()[p].surrogate, params[p], x, axis,
                                              fn.order, mask_for(masks, p))});
    }
  }
  ResidualContext<T> ctx(x, [&cache](std::string_view key,
                                     std::size_t axis) -> const std::vector<Jet<T>>& {
    for (const auto& e : cache) {
      if (e.key == key && e.axis == axis) return e.jets;
    }
    throw UnknownProcessKey(fmt::format("residual reads '{}' along axis {} without declaring it",
                                        key, axis));
  });
  std::vector<T> r;
  if constexpr (std::is_same_v<T, double>) {
    r = fn.eval_double(ctx);
  } else {
    r = fn.eval_var(ctx);
  }
  if (r.size() != fn.out_dim) throw DimensionMismatch("residual returned the wrong width");
  return r;
}

}  // namespace

template <class T>
void UqModel::residual_rows(std::span<const T> theta, const MaskSet* masks, Scaling scaling,
                            std::vector<T>& rows) const {
  std::vector<std::vector<T>> params;
  params.reserve(processes_.size());
  for (std::size_t i = 0; i < processes_.size(); ++i) params.push_back(process_params<T>(i, theta));

  for (const auto& term : terms_) {
    std::visit(
        [&](const auto& t) {
          using Term = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<Term, OperatorTerm>) {
            const std::size_t p = index_of(t.key);
            const auto& spec = std::get<DeepONetSpec>(processes_[p].surrogate);
            const std::size_t n = t.data.n_functions();
            const std::size_t nu = t.data.locations.size();
            const double w = weights_.u;
            if (scaling == Scaling::Mse && n * nu == 0) {
              if (w != 0.0) throw EmptyDataset("operator term has no data");
              return;
            }
            const double scale =
                scaling == Scaling::Bayesian ? 1.0 / t.noise_std : std::sqrt(w / double(n * nu));
            const std::span<const T> all(params[p]);
            const auto branch_params = all.first(spec.branch.param_count());
            const auto trunk_params = all.subspan(spec.branch.param_count());
            std::vector<std::vector<T>> trunk;
            trunk.reserve(nu);
            for (double xj : t.data.locations) {
              trunk.push_back(fnn_values<T>(spec.trunk, trunk_params, std::span<const double>(&xj, 1)));
            }
            for (std::size_t i = 0; i < n; ++i) {
              const auto b = fnn_values<T>(spec.branch, branch_params, t.data.sensor_values[i]);
              for (std::size_t j = 0; j < nu; ++j) {
                const T g = ad::dot(std::span<const T>(b), std::span<const T>(trunk[j]));
                rows.push_back((g - t.data.targets[i][j]) * scale);
              }
            }
          } else {
            const Dataset& d = t.data;
            const std::size_t n = d.size();
            const double w = weights_.of(d.tag);
            if (scaling == Scaling::Mse && n == 0) {
              if (w != 0.0) {
                throw EmptyDataset(fmt::format("{} term has no rows", tag_name(d.tag)));
              }
              return;
            }
            const double mse_scale = scaling == Scaling::Mse ? std::sqrt(w / double(n)) : 0.0;
            for (std::size_t i = 0; i < n; ++i) {
              std::vector<T> pred;
              if constexpr (std::is_same_v<Term, DirectTerm>) {
                const std::size_t p = index_of(t.key);
                const auto full = surrogate_eval<T>(processes_[p].surrogate, params[p], d.input(i),
                                                    mask_for(masks, p));
                if (t.components.empty()) {
                  pred = full;
                } else {
                  for (int c : t.components) pred.push_back(full[c]);
                }
              } else {
                pred = residual_at<T>(t.fn, *this, params, d.input(i), masks);
              }
              const auto y = d.target(i);
              for (std::size_t j = 0; j < d.du; ++j) {
                const double scale = scaling == Scaling::Bayesian ? 1.0 / d.noise_std[j] : mse_scale;
                rows.push_back((pred[j] - y[j]) * scale);
              }
            }
          }
        },
        term);
  }
}

template <class T>
std::vector<T> UqModel::standardized_residuals(std::span<const T> theta,
                                               const MaskSet* masks) const {
  std::vector<T> rows;
  residual_rows<T>(theta, masks, Scaling::Bayesian, rows);
  return rows;
}

template <class T>
T UqModel::log_likelihood(std::span<const T> theta, const MaskSet* masks) const {
  std::vector<T> rows;
  residual_rows<T>(theta, masks, Scaling::Bayesian, rows);
  double constant = 0.0;
  for (const auto& term : terms_) {
    std::visit(
        [&](const auto& t) {
          using Term = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<Term, OperatorTerm>) {
            const double count = double(t.data.n_functions() * t.data.locations.size());
            constant -= count * (std::log(t.noise_std) + kHalfLog2Pi);
          } else {
            for (double s : t.data.noise_std) {
              constant -= double(t.data.size()) * (std::log(s) + kHalfLog2Pi);
            }
          }
        },
        term);
  }
  const std::span<const T> r(rows);
  return -0.5 * ad::dot(r, r) + constant;
}

template <class T>
T UqModel::log_posterior(std::span<const T> theta) const {
  const T lp = log_prior<T>(theta);
  if (!std::isfinite(ad::value_of(lp))) return lp;
  return lp + log_likelihood<T>(theta);
}

template <class T>
T UqModel::mse_loss(std::span<const T> theta, const MaskSet* masks) const {
  std::vector<T> rows;
  residual_rows<T>(theta, masks, Scaling::Mse, rows);
  const std::span<const T> r(rows);
  T loss = ad::dot(r, r);
  for (std::size_t i = 0; i < processes_.size(); ++i) {
    const double l2 = processes_[i].variable.l2_weight;
    if (l2 == 0.0) continue;
    const auto p = theta.subspan(offsets_[i], processes_[i].param_count());
    loss = loss + l2 * ad::dot(p, p);
  }
  return loss;
}

template <class T>
std::vector<T> UqModel::predict(std::string_view key, std::span<const T> theta,
                                std::span<const double> x, const MaskSet* masks) const {
  const std::size_t p = index_of(key);
  return surrogate_eval<T>(processes_[p].surrogate, process_params<T>(p, theta), x,
                           mask_for(masks, p));
}

// ---------------------------------------------------------------- free functions

double normal_loglik(const Dataset& ds, std::span<const double> predictions) {
  if (predictions.size() != ds.targets.size()) {
    throw ShapeMismatch(fmt::format("{} predictions for {} targets", predictions.size(),
                                    ds.targets.size()));
  }
  ds.validate(true);
  double acc = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t d = 0; d < ds.du; ++d) {
      const double s = ds.noise_std[d];
      const double r = ds.targets[i * ds.du + d] - predictions[i * ds.du + d];
      acc += -r * r / (2.0 * s * s) - 0.5 * std::log(2.0 * std::numbers::pi * s * s);
    }
  }
  return acc;
}

template <class T>
std::vector<T> residual_eval(const ResidualFn& fn, const UqModel& model, std::span<const T> theta,
                             std::span<const double> points, std::size_t dx) {
  std::vector<std::vector<T>> params;
  for (std::size_t i = 0; i < model.processes().size(); ++i) {
    params.push_back(model.process_params<T>(i, theta));
  }
  std::vector<T> out;
  for (std::size_t i = 0; i * dx < points.size(); ++i) {
    const auto r = residual_at<T>(fn, model, params, points.subspan(i * dx, dx), nullptr);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

template <class T>
T deeponet_mse(const OperatorDataset& data, const DeepONetSpec& spec, std::span<const T> theta) {
  data.validate();
  if (theta.size() != spec.param_count()) throw DimensionMismatch("deeponet parameter count");
  if (spec.branch.input_dim() != static_cast<int>(data.sensor_locations.size())) {
    throw DimensionMismatch("sensor count differs from the branch input width");
  }
  const std::size_t n = data.n_functions();
  const std::size_t nu = data.locations.size();
  if (n * nu == 0) throw EmptyDataset("operator dataset is empty");
  const auto branch_params = theta.first(spec.branch.param_count());
  const auto trunk_params = theta.subspan(spec.branch.param_count());
  std::vector<std::vector<T>> trunk;
  for (double xj : data.locations) {
    trunk.push_back(fnn_values<T>(spec.trunk, trunk_params, std::span<const double>(&xj, 1)));
  }
  std::vector<T> err;
  err.reserve(n * nu);
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = fnn_values<T>(spec.branch, branch_params, data.sensor_values[i]);
    for (std::size_t j = 0; j < nu; ++j) {
      err.push_back(ad::dot(std::span<const T>(b), std::span<const T>(trunk[j])) -
                    data.targets[i][j]);
    }
  }
  const std::span<const T> e(err);
  return ad::dot(e, e) * (1.0 / double(n * nu));
}

std::vector<std::vector<double>> deeponet_predict(const OperatorDataset& data,
                                                  const DeepONetSpec& spec,
                                                  std::span<const double> theta) {
  std::vector<std::vector<double>> out;
  for (const auto& sensors : data.sensor_values) {
    std::vector<double> row;
    for (double xj : data.locations) {
      row.push_back(deeponet_eval<double>(spec, theta, sensors, std::span<const double>(&xj, 1)));
    }
    out.push_back(std::move(row));
  }
  return out;
}

#define UQ_INSTANTIATE(T)                                                                     \
  template std::vector<T> UqModel::process_params<T>(std::size_t, std::span<const T>) const; \
  template T UqModel::log_prior<T>(std::span<const T>) const;                                \
  template T UqModel::log_likelihood<T>(std::span<const T>, const MaskSet*) const;           \
  template T UqModel::log_posterior<T>(std::span<const T>) const;                            \
  template T UqModel::mse_loss<T>(std::span<const T>, const MaskSet*) const;                 \
  template std::vector<T> UqModel::standardized_residuals<T>(std::span<const T>,             \
                                                             const MaskSet*) const;          \
  template std::vector<T> UqModel::predict<T>(std::string_view, std::span<const T>,          \
                                              std::span<const double>, const MaskSet*) const; \
  template std::vector<T> residual_eval<T>(const ResidualFn&, const UqModel&,                \
                                           std::span<const T>, std::span<const double>,      \
                                           std::size_t);                                     \
  template T deeponet_mse<T>(const OperatorDataset&, const DeepONetSpec&, std::span<const T>);

UQ_INSTANTIATE(double)
UQ_INSTANTIATE(Var)

#undef UQ_INSTANTIATE

}  // namespace uq
