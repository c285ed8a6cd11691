#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "unibound/distribution.hpp"
#include "unibound/model.hpp"
#include "unibound/types.hpp"

namespace unibound {

// ============================================================================
// Brute-force dense reference solver, independent of the sparse engine.
//
// The state space is truncated to a finite box; the time-dependent generator
// is compiled once (off-diagonal rates are affine in t) and the forward
// equation dp/dt = p·Q(t) is integrated with an adaptive embedded
// Runge–Kutta 5(4) pair. Transitions that would leave the box are dropped
// from the generator entirely (reflecting-by-omission), and their would-be
// outflux is integrated alongside p as the boundary-mass report: when that
// mass is negligible, the reference is trustworthy for pointwise comparison.
// ============================================================================

/// Finite box of states: per-species inclusive upper bounds, lower bounds 0.
/// Enumeration is lexicographic in the species order (first species most
/// significant).
struct StateBox {
  StateVec upper;

  std::size_t size() const;
  bool contains(const StateVec& x) const;
  std::size_t index_of(const StateVec& x) const;  // lexicographic rank
  StateVec state_of(std::size_t idx) const;
};

/// One generator row at (x, t): (target state, rate) pairs for every enabled
/// class whose target stays inside the box, plus the diagonal entry
/// (x, −Σ retained rates). Out-of-box transitions are omitted from both the
/// off-diagonals and the diagonal.
std::vector<std::pair<StateVec, double>> generator_row(const StateVec& x, double t,
                                                       const StateBox& box,
                                                       const ModelSpec& spec);

struct ReferenceSolution {
  StateBox box;
  std::vector<double> p;       // dense, box enumeration order
  double boundary_mass = 0.0;  // ∫ Σ_x p(x,t)·(dropped outflux rate) dt
  double t = 0.0;

  double at(const StateVec& x) const {
    return box.contains(x) ? p[box.index_of(x)] : 0.0;
  }
};

/// Integrates dp/dt = p·Q(t) from t0 to t1 over the box with a Dormand–
/// Prince 5(4) pair at local tolerance tol. Entries are floored to 0 on
/// output (tiny negative undershoot is integration noise); the total mass
/// must be conserved within 10·tol or the integration reports failure.
/// Throws on p0 support outside the box and on step-size underflow.
ReferenceSolution integrate_forward(const ModelSpec& spec, const SparseDistribution& p0,
                                    double t0, double t1, const StateBox& box,
                                    double tol);

struct Violation {
  StateVec state;
  double p_hat = 0.0;
  double p_ref = 0.0;
};

struct UnderApproxReport {
  std::vector<Violation> violations;  // states with p_hat > p_ref + slack
  double worst_excess = 0.0;          // max over states of p_hat − p_ref
  double boundary_mass = 0.0;         // copied from the reference
  bool pass() const { return violations.empty(); }
};

/// Checks p_hat(x) ≤ ref(x) + slack for every state in p_hat's support
/// (states outside the box compare against 0). The check only certifies an
/// under-approximation when the reference's boundary mass is itself below
/// the slack; callers gate on report.boundary_mass.
UnderApproxReport verify_underapprox(const SparseDistribution& p_hat,
                                     const ReferenceSolution& ref, double slack);

}  // namespace unibound
