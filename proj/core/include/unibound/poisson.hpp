#pragma once

#include <optional>
#include <vector>

#include "unibound/rate.hpp"
#include "unibound/types.hpp"

namespace unibound {

// ============================================================================
// Poisson step parameters and right-truncation machinery.
//
// Each uniformization window subordinates the chain to an inhomogeneous
// Poisson process with rate Λ(t′); the jump count over the window is Poisson
// with mean μ = ∫ Λ. The window keeps jump counts 0..R where R is the
// smallest right truncation point whose tail mass is below ε.
// ============================================================================

struct PoissonTruncation {
  double mu = 0.0;
  int R = 0;
  std::vector<double> weights;  // weights[i] = e^{-μ} μ^i / i!, i = 0..R
  double captured_mass = 0.0;   // Σ weights, clamped to ≤ 1
};

/// μ = ∫_t^{t+Δ} Λ(t′) dt′, exact for affine Λ. Throws if Δ < 0 or Λ is
/// negative anywhere on the interval (endpoints suffice for affine Λ).
double step_parameter(const UniformizationRate& lambda, double t, double delta);

/// Smallest R with Σ_{i=0}^R pmf(i; μ) ≥ 1 − ε. Stable for μ up to 1e6 via
/// mode-scaled recurrences; small μ uses direct summation.
int right_truncation(double mu, double epsilon);

/// Poisson pmf values 0..R, computed in extended precision without underflow
/// for μ up to 1e6.
std::vector<double> weights(double mu, int R);

/// Bundles right_truncation + weights for one window.
PoissonTruncation truncate(double mu, double epsilon);

/// Fast window-probe helper: returns right_truncation(mu, epsilon) when it is
/// ≤ r_star, std::nullopt otherwise. Rejects μ ≥ r_star + 2 in O(1) via the
/// Poisson median lower bound μ − ln 2, so step-size searches never pay for
/// huge μ probes.
std::optional<int> truncation_within(double mu, double epsilon, int r_star);

}  // namespace unibound
