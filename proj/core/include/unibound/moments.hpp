#pragma once

#include <vector>

#include "unibound/distribution.hpp"
#include "unibound/model.hpp"
#include "unibound/types.hpp"

namespace unibound {

/// Means and covariances of the population vector at one instant.
struct MomentState {
  std::vector<double> mean;  // length n
  std::vector<double> cov;   // n×n row-major, symmetric
  double t = 0.0;

  double& c(std::size_t k, std::size_t l, std::size_t n) { return cov[k * n + l]; }
  double c(std::size_t k, std::size_t l, std::size_t n) const { return cov[k * n + l]; }
};

/// Empirical moments of a sparse distribution after renormalization.
/// Throws on zero mass.
MomentState moments_of(const SparseDistribution& p, double t, std::size_t n);

/// Time derivatives of means and covariances under second-order moment
/// closure: each class contributes through its rate's value, gradient, and
/// Hessian at the current mean (a second-order Taylor evaluation that is
/// exact for rates of degree ≤ 1 and closes the hierarchy for degree 2).
/// Throws for rates of monomial degree > 2.
void moment_derivatives(const ModelSpec& spec, const MomentState& state, double t,
                        std::vector<double>& d_mean, std::vector<double>& d_cov);

/// Classical fixed-step fourth-order integration of the moment equations
/// from state.t to t1 in `steps` equal steps. The moment ODEs are smooth and
/// low-dimensional; only an upper envelope is consumed downstream.
MomentState integrate_moments(const ModelSpec& spec, MomentState state, double t1,
                              int steps);

/// Hook invoked after each internal step of integrate_moments.
using MomentGridObserver = void (*)(const MomentState&, void*);

/// As integrate_moments but reports every grid point (including the initial
/// one) to the observer; used to maximize mean + ℓ·σ over the window.
MomentState integrate_moments_observed(const ModelSpec& spec, MomentState state,
                                       double t1, int steps,
                                       MomentGridObserver observer, void* ctx);

}  // namespace unibound
