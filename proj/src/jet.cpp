#include "uq/jet.hpp"

namespace uq {

Jet<double> jet_eval(const JetFn& fn, std::span<const double> at, std::size_t axis, int order) {
  if (order < 1 || order > kMaxJetOrder) {
    throw OrderTooHigh("jet_eval order must be 1..3, got " + std::to_string(order));
  }
  if (axis >= at.size()) throw DimensionMismatch("jet direction outside input dimension");
  std::vector<Jet<double>> inputs;
  inputs.reserve(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    inputs.push_back(i == axis ? Jet<double>::variable(at[i], order) : Jet<double>(at[i], order));
  }
  Jet<double> out = fn(inputs);
  for (double c : out.coeffs()) {
    if (!std::isfinite(c)) throw NonFiniteValue("jet coefficient is not finite");
  }
  return out;
}

}  // namespace uq
