#pragma once

#include <utility>

#include "unibound/model.hpp"
#include "unibound/types.hpp"

namespace unibound {

/// Affine uniformization rate Λ(t) = A + B·t induced by a dominating state.
///
/// Λ is the sum of λ_j(t)·r_j(x_max) over every class whose guard LOWER
/// bounds hold at x_max. Upper guard bounds are deliberately ignored here:
/// the dominating state maxes all dimensions at once, which can violate
/// mutually exclusive upper bounds (e.g. both promoter-occupancy species at
/// 1) and would wrongly drop classes that are live elsewhere in the window.
/// For any window state x ≤ x_max componentwise, each class enabled at x has
/// its lower bounds satisfied at x_max too, and r_j(x) ≤ r_j(x_max) by
/// monotonicity, so Λ(t) ≥ exit_rate(x, t) throughout the window.
struct UniformizationRate {
  StateVec x_max;
  double A = 0.0;
  double B = 0.0;

  double operator()(double t) const { return A + B * t; }

  /// Exact ∫_t^{t+Δ} Λ — affine integrands integrate via the midpoint value.
  double integral(double t, double delta) const {
    return delta * (A + B * (t + 0.5 * delta));
  }

  static UniformizationRate from_state(const ModelSpec& spec, StateVec dominating) {
    UniformizationRate lam;
    for (const TransitionClass& c : spec.classes) {
      if (!c.lower_bounds_hold(dominating)) continue;
      const double r = c.state_factor(dominating);
      lam.A += r * c.time_factor.a;
      lam.B += r * c.time_factor.b;
    }
    lam.x_max = std::move(dominating);
    return lam;
  }
};

}  // namespace unibound
