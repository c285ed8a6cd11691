#pragma once

#include <vector>

#include "unibound/distribution.hpp"
#include "unibound/model.hpp"
#include "unibound/poisson.hpp"
#include "unibound/rate.hpp"
#include "unibound/types.hpp"

namespace unibound {

// ============================================================================
// One uniformization window and the under-approximating DTMC arithmetic.
//
// Over a window [t, t+Δ] with dominating rate Λ, each class contributes at
// least u_j(x) = r_j(x) · min_{t′} λ_j(t′)/Λ(t′) to the jump probability and
// each state keeps at least u₀(y) = 1 − max_{t′} Σ_j α_j(y,t′)/Λ(t′) as a
// self-loop. Iterating this kernel and mixing with Poisson weights yields a
// pointwise lower bound on the transient distribution; all probability shed
// along the way is tracked in an ErrorLedger.
// ============================================================================

/// Everything needed to execute one window.
struct StepPlan {
  double t_start = 0.0;
  double delta = 0.0;
  UniformizationRate lambda;  // carries x_max
  double mu = 0.0;
  PoissonTruncation truncation;
  int r_star = 0;
  bool full_span = false;  // window reaches the segment end exactly
};

struct StepRecord {
  double t = 0.0;      // window start
  double delta = 0.0;  // window length
  double mu = 0.0;
  int R = 0;
  double bounding_loss = 0.0;
  double poisson_loss = 0.0;
  double prune_loss = 0.0;
  std::size_t window_size = 0;  // states touched in the window
};

/// Cumulative loss accounting. The invariant 1 − Σp̂ = bounding + poisson +
/// prune holds to accumulation precision because each window's bounding loss
/// is defined as the residual of the window's mass balance.
class ErrorLedger {
 public:
  void record(const StepRecord& rec) {
    bounding_.add(rec.bounding_loss);
    poisson_.add(rec.poisson_loss);
    prune_.add(rec.prune_loss);
    steps_.push_back(rec);
  }

  double bounding_loss() const { return static_cast<double>(bounding_.value()); }
  double poisson_loss() const { return static_cast<double>(poisson_.value()); }
  double prune_loss() const { return static_cast<double>(prune_.value()); }
  double total() const {
    return static_cast<double>(bounding_.value() + poisson_.value() + prune_.value());
  }
  const std::vector<StepRecord>& steps() const { return steps_; }

 private:
  NeumaierSumT<long double> bounding_;
  NeumaierSumT<long double> poisson_;
  NeumaierSumT<long double> prune_;
  std::vector<StepRecord> steps_;
};

/// u_j(x) for one class: r_j(x) · min over the window of λ_j/Λ. The ratio of
/// two affine functions is monotone on an interval (its derivative has
/// constant sign), so the minimum sits at an endpoint. Returns 0 when x is
/// outside the guard. Throws if Λ vanishes at an endpoint while the class
/// rate does not.
double jump_bound(const ModelSpec& spec, std::size_t j, const StateVec& x,
                  const StepPlan& plan);

/// u₀(y) = 1 − max over the window of Σ_j α_j(y,t′)/Λ(t′). The enabled-class
/// rates share the denominator Λ, so the sum collapses to a single
/// affine-over-affine ratio and the endpoint maximum is exact, not merely an
/// upper bound. Throws if the result is materially negative (Λ failed to
/// dominate y).
double self_loop_bound(const ModelSpec& spec, const StateVec& y, const StepPlan& plan);

struct DtmcStepResult {
  SparseDistribution next;
  double prune_loss = 0.0;   // mass of entries removed by the δ-threshold
  double step_defect = 0.0;  // mass lost to the min-bounds (before pruning)
};

/// One lower-bounded DTMC step: scatter each source state over its enabled
/// classes with weights u_j, keep u₀ in place, then drop entries below
/// delta_threshold. Throws if any bound leaves [0, 1].
DtmcStepResult dtmc_step(const ModelSpec& spec, const SparseDistribution& v,
                         const StepPlan& plan, double delta_threshold);

/// Poisson mixture Σ_i weights[i] · v_sequence[i].
SparseDistribution accumulate(const std::vector<SparseDistribution>& v_sequence,
                              const std::vector<double>& weights);

/// Exact one-jump contribution e^{−μ}[Σ_j v₀(x)·r_j(x)·I_j scattered to
/// x+w_j, plus v₀(y)·(μ − Σ_j r_j(y)·I_j) kept in place], with
/// I_j = ∫ λ_j over the window. Conditioning on the single jump time makes
/// Λ cancel, so this term carries the full Poisson weight e^{−μ}μ with no
/// bounding loss while remaining an under-approximation term-by-term.
SparseDistribution single_jump_term(const ModelSpec& spec,
                                    const SparseDistribution& v0,
                                    const StepPlan& plan);

/// 1 − Σ entries, clamped into [0, 1].
double total_error(const SparseDistribution& p);

}  // namespace unibound
