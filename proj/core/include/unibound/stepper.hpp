#pragma once

#include <optional>
#include <vector>

#include "unibound/distribution.hpp"
#include "unibound/engine.hpp"
#include "unibound/model.hpp"
#include "unibound/moments.hpp"
#include "unibound/types.hpp"

namespace unibound {

// ============================================================================
// Window selection and the multi-window transient analysis.
//
// Each window needs a dominating state x_max whose exit rate bounds every
// state the window can touch, and a length Δ whose Poisson jump count
// truncates at the requested right point R*. Δ is found by probing the full
// remaining span first and then bisecting; x_max comes either from monotone
// worst-case growth (method "monotone") or from integrating mean/covariance
// ODEs and taking a mean + ℓ·σ envelope (method "moments", with retry on
// underestimation).
// ============================================================================

enum class FindMaxMethod { monotone, moments };

/// Dominating state for monotone rates: componentwise support maximum plus
/// R* times the largest positive per-dimension change, clamped to any
/// guard-implied per-species cap.
StateVec find_max_state_monotone(const SparseDistribution& support, int r_star,
                                 const ModelSpec& spec);

/// Dominating state from moment ODEs: integrates means and covariances over
/// [t, t+Δ] from the (renormalized) moments of p_hat with a fixed-step
/// fourth-order scheme (Δ/200 steps), maximizes E_k + ℓ·σ_k over the
/// integration grid per dimension, rounds up, and clamps to guard caps.
StateVec find_max_state_moments(const SparseDistribution& p_hat, double t,
                                double delta, double ell, const ModelSpec& spec);

/// Picks the window [t, t+Δ]: accepts the full remaining span when its jump
/// count already truncates at R ≤ R*, otherwise bisects on Δ (midpoint rule,
/// 64-iteration cap) to find the largest feasible length and accepts a fixed
/// fraction of it, keeping the per-window Poisson tail well under ε. The
/// dominating state is refreshed per probe for the moments method; the
/// monotone envelope does not depend on Δ.
StepPlan choose_step(const ModelSpec& spec, int r_star, double t, double t_hi,
                     double epsilon, const SparseDistribution& support,
                     FindMaxMethod method, double ell);

/// Envelope-retry policy: when a window saw `observed` beyond the plan's
/// dominating state, widen ℓ by 2; beyond the cap, fall back to the monotone
/// method for the window. A state inside the envelope is a no-op.
struct RetryDecision {
  double ell = 0.0;
  bool retry = false;
  bool fall_back_to_monotone = false;
};
RetryDecision retry_on_exceed(const StepPlan& plan, const StateVec& observed,
                              double ell, double ell_cap = 16.0);

struct RunOptions {
  int r_star = 5;
  double epsilon = 1e-10;
  double delta_threshold = 1e-15;
  FindMaxMethod findmax = FindMaxMethod::monotone;
  double ell = 4.0;
  std::vector<double> checkpoints;        // emission times within [0, t_max]
  std::optional<double> rho_budget;       // per-run prune budget ρ
  std::optional<double> t_max;            // defaults to the model horizon
  bool exact_one_jump = true;             // carry the i=1 term exactly
};

struct Checkpoint {
  double t = 0.0;
  SparseDistribution dist;
};

struct RunResult {
  std::vector<Checkpoint> checkpoints;
  SparseDistribution final_dist;
  double final_time = 0.0;
  ErrorLedger ledger;
  std::size_t max_window_size = 0;
  int envelope_retries = 0;   // moment-envelope widenings that re-ran a window
  int fallback_windows = 0;   // windows forced onto the monotone envelope
  int budget_retries = 0;     // ρ-budget re-runs with a smaller threshold
  double ell_final = 0.0;
};

/// Initial sparse distribution of a model.
SparseDistribution initial_distribution(const ModelSpec& spec);

/// Full multi-window analysis from t=0 to t_max with checkpoint emission.
/// Windows are clipped to checkpoint boundaries so emitted times are exact.
RunResult run(const ModelSpec& spec, const RunOptions& opts);

}  // namespace unibound
