#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "unibound/distribution.hpp"
#include "unibound/engine.hpp"
#include "unibound/model.hpp"
#include "unibound/types.hpp"

namespace unibound {

/// Thrown when a window touches a state outside the dominating envelope;
/// the multi-step driver catches it and retries the window with a wider
/// moment envelope (or falls back to the monotone method).
struct WindowExceeded {
  StateVec state;
  std::size_t dim = 0;
};

/// Thrown when a window's prune loss overruns the ρ-budget; the driver
/// retries the window once with a smaller pruning threshold.
struct PruneBudgetExceeded {
  double prune_loss = 0.0;
};

/// Mutable run state for the multi-window iteration.
///
/// States are interned once into slot ids; per-slot class rates, the affine
/// exit-rate coefficients, and successor slots are cached forever, so
/// steady-state windows run as flat array arithmetic with no hashing. All
/// window-local arrays (current/next chain vectors and the accumulator) are
/// cleaned up through a touched-slot list, which also powers rollback for
/// retried windows: the committed distribution is only written at the very
/// end of a window.
class Workspace {
 public:
  explicit Workspace(const ModelSpec& spec);

  /// Replaces the run state with p0.
  void load(const SparseDistribution& p0);

  struct WindowControls {
    double delta_threshold = 0.0;
    bool exact_one_jump = true;
    /// Componentwise state cap to enforce (moment-envelope runs); nullptr
    /// disables the check (the monotone envelope cannot be exceeded).
    const StateVec* envelope = nullptr;
    /// Abort the window (without committing) if its prune loss exceeds this;
    /// negative disables the check.
    double prune_budget = -1.0;
  };

  struct WindowStats {
    double bounding_loss = 0.0;
    double poisson_loss = 0.0;
    double prune_loss = 0.0;
    std::size_t window_size = 0;
  };

  /// Executes one uniformization window: exact i=0 (and optionally i=1)
  /// terms, the min-bound chain for i ≥ 2, δ-pruning with Poisson-tail loss
  /// attribution, and the store-prune at commit. Throws WindowExceeded /
  /// PruneBudgetExceeded with the run state unchanged.
  WindowStats execute_window(const StepPlan& plan, const WindowControls& ctl);

  long double mass() const { return mass_; }
  std::size_t support_size() const { return live_.size(); }
  const StateVec& support_max() const { return support_max_; }

  SparseDistribution snapshot() const;

  template <typename F>
  void for_each(F&& f) const {
    for (std::int32_t slot : live_) f(states_[static_cast<std::size_t>(slot)],
                                      p_[static_cast<std::size_t>(slot)]);
  }

 private:
  std::int32_t intern(const StateVec& x);
  std::int32_t resolve_edge(std::int32_t slot, std::size_t e);
  void touch(std::int32_t slot, const StateVec* envelope);
  double window_u0(std::int32_t slot, double t0, double t1, double lam0, double lam1);
  void rollback();

  const ModelSpec& spec_;
  std::size_t n_ = 0;  // species
  std::size_t m_ = 0;  // classes

  // Flattened class data.
  std::vector<double> cls_a_, cls_b_;  // time factors
  std::vector<Count> cls_change_;      // m×n

  // Slot registry.
  std::unordered_map<StateVec, std::int32_t, StateVecHash> index_;
  std::vector<StateVec> states_;

  // Per-slot caches (constant per state). Only classes that are enabled with
  // a positive state factor get an edge, so window sweeps skip guard-disabled
  // classes entirely.
  std::vector<std::uint32_t> edge_off_;   // per slot: first edge index
  std::vector<std::uint16_t> edge_cnt_;   // per slot: number of edges
  std::vector<std::uint16_t> edge_j_;     // per edge: class index
  std::vector<double> edge_r_;            // per edge: state factor
  std::vector<std::int32_t> edge_succ_;   // per edge: successor slot; -2 = unresolved
  std::vector<double> na_, nb_;           // exit rate of the state = na + nb·t

  // Run state.
  std::vector<double> p_;
  std::vector<std::int32_t> live_;
  long double mass_ = 0.0L;
  StateVec support_max_;

  // Window-local state.
  std::vector<double> a_, b_, acc_;
  std::vector<double> u0_;
  std::vector<std::uint32_t> u0_epoch_, touch_epoch_, next_stamp_;
  std::vector<std::int32_t> touched_, cur_, nxt_, scratch_;
  std::uint32_t epoch_ = 0;
  std::uint32_t stamp_ = 0;

  // Window-scope parameters cached for window_u0.
  std::vector<double> q_;        // per-class min-bound ratio
  std::vector<double> tails_;    // tails_[i] = Σ_{k≥i} weights[k]
  std::vector<double> integ_;    // per-class ∫λ_j over the window
};

}  // namespace unibound
