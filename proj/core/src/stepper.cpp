#include "unibound/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unibound/poisson.hpp"
#include "unibound/rate.hpp"
#include "unibound/workspace.hpp"

namespace unibound {
namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("stepper: " + msg); }

StateVec support_max_of(const SparseDistribution& support) {
  if (support.empty()) fail("cannot derive a dominating state from an empty support");
  StateVec y;
  for (const auto& [x, p] : support.entries()) {
    (void)p;
    if (y.empty()) {
      y = x;
      continue;
    }
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = std::max(y[k], x[k]);
  }
  return y;
}

/// Support maximum plus R* worst-case positive jumps per dimension, clamped
/// to guard-implied caps (but never below the support itself).
StateVec monotone_envelope(const ModelSpec& spec, const StateVec& y, int r_star) {
  const std::size_t n = spec.dim();
  if (y.size() != n) fail("support dimension does not match the model");
  StateVec x(n);
  for (std::size_t k = 0; k < n; ++k) {
    Count up = 0;
    for (const TransitionClass& c : spec.classes) up = std::max(up, c.change[k]);
    Count v = y[k] + static_cast<Count>(r_star) * up;
    if (spec.dim_cap[k] && *spec.dim_cap[k] < v) v = std::max(*spec.dim_cap[k], y[k]);
    x[k] = v;
  }
  return x;
}

struct EnvelopeCtx {
  std::size_t n = 0;
  double ell = 0.0;
  std::vector<double> env;
};

void envelope_observer(const MomentState& s, void* raw) {
  auto* ctx = static_cast<EnvelopeCtx*>(raw);
  for (std::size_t k = 0; k < ctx->n; ++k) {
    const double var = std::max(0.0, s.c(k, k, ctx->n));
    const double v = s.mean[k] + ctx->ell * std::sqrt(var);
    ctx->env[k] = std::max(ctx->env[k], v);
  }
}

constexpr int kMomentGridSteps = 200;

/// Integrates the moment ODEs over [m0.t, m0.t + delta] and turns the
/// per-dimension grid maximum of mean + ℓ·σ into an integer dominating
/// state. Returns nullopt when the integration overshoots to non-finite or
/// absurd values, which happens when a quadratic closure is probed with a
/// far-too-long Δ; callers treat such a probe as infeasible and shrink Δ.
std::optional<StateVec> moment_envelope(const ModelSpec& spec, const MomentState& m0,
                                        double delta, double ell) {
  EnvelopeCtx ctx;
  ctx.n = spec.dim();
  ctx.ell = ell;
  ctx.env.assign(ctx.n, 0.0);
  try {
    integrate_moments_observed(spec, m0, m0.t + delta, kMomentGridSteps,
                               &envelope_observer, &ctx);
  } catch (const Error& e) {
    if (std::string(e.what()).find("diverged") != std::string::npos) return std::nullopt;
    throw;
  }
  StateVec x(ctx.n);
  for (std::size_t k = 0; k < ctx.n; ++k) {
    const double v = ctx.env[k];
    if (!std::isfinite(v) || v >= 9.0e18) return std::nullopt;
    Count c = v <= 0.0 ? 0 : static_cast<Count>(std::ceil(v));
    if (spec.dim_cap[k] && *spec.dim_cap[k] < c) c = *spec.dim_cap[k];
    x[k] = c;
  }
  return x;
}

using EnvelopeFn = std::function<std::optional<StateVec>(double)>;

/// Window-length search shared by the public choose_step and the run loop.
/// The full remaining span is probed first; otherwise Δ is bisected with a
/// 64-probe cap to locate the largest feasible length, and the accepted
/// window is a fixed fraction of that boundary so the per-window Poisson
/// tail stays well below ε instead of exactly exhausting it.
StepPlan plan_window(const ModelSpec& spec, int r_star, double t, double t_hi,
                     double epsilon, const EnvelopeFn& x_max_of) {
  if (r_star < 0) fail("jump budget R* must be nonnegative");
  if (!(epsilon > 0.0 && epsilon < 1.0)) fail("epsilon must lie in (0, 1)");
  if (!(t_hi > t)) fail("window end must lie strictly after its start");
  const double span = t_hi - t;

  const auto probe = [&](double delta) -> std::optional<int> {
    std::optional<StateVec> x = x_max_of(delta);
    if (!x) return std::nullopt;
    const UniformizationRate lam = UniformizationRate::from_state(spec, std::move(*x));
    return truncation_within(step_parameter(lam, t, delta), epsilon, r_star);
  };
  const auto make = [&](double delta, bool full) {
    std::optional<StateVec> x = x_max_of(delta);
    if (!x) fail("dominating envelope unavailable for an accepted window length");
    StepPlan plan;
    plan.t_start = t;
    plan.delta = delta;
    plan.lambda = UniformizationRate::from_state(spec, std::move(*x));
    plan.mu = step_parameter(plan.lambda, t, delta);
    plan.truncation = truncate(plan.mu, epsilon);
    plan.r_star = r_star;
    plan.full_span = full;
    return plan;
  };

  if (probe(span)) return make(span, true);

  double lo = 0.0;
  double hi = span;
  double best = -1.0;
  for (int it = 0; it < 64; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;  // interval exhausted in floating point
    const std::optional<int> r = probe(mid);
    if (r) {
      best = mid;
      lo = mid;
      // Keep refining toward the largest feasible Δ: a longer window at the
      // same jump budget means fewer windows overall. Stop once the bracket
      // is within half a percent of the accepted length.
      if (hi - lo < 5e-3 * hi) break;
    } else {
      hi = mid;
    }
  }
  if (best < 0.0) {
    fail("no window length found whose jump count truncates within the budget");
  }
  // Back the accepted length off the feasibility boundary. Right at the
  // boundary the Poisson tail beyond R* equals the full ε budget, so every
  // window pays ε; at 0.7 of the boundary length the tail shrinks by nearly
  // an order of magnitude while the window count only grows by ~1.4x, a
  // large net reduction of the accumulated truncation loss.
  constexpr double kBoundaryBackoff = 0.7;
  const double backed = best * kBoundaryBackoff;
  if (backed > 0.0 && probe(backed)) best = backed;
  return make(best, false);
}

/// Renormalized empirical moments of the workspace's committed distribution
/// (same two-pass centered computation as moments_of, without materializing
/// a snapshot).
MomentState workspace_moments(const Workspace& ws, double t, std::size_t n) {
  long double mass = 0.0L;
  std::vector<long double> s1(n, 0.0L);
  ws.for_each([&](const StateVec& x, double p) {
    mass += p;
    for (std::size_t k = 0; k < n; ++k) {
      s1[k] += static_cast<long double>(p) * static_cast<long double>(x[k]);
    }
  });
  if (!(mass > 0.0L)) fail("cannot take moments of a zero-mass distribution");

  MomentState m;
  m.t = t;
  m.mean.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    m.mean[k] = static_cast<double>(s1[k] / mass);
  }
  std::vector<long double> s2(n * n, 0.0L);
  ws.for_each([&](const StateVec& x, double p) {
    for (std::size_t k = 0; k < n; ++k) {
      const long double dk = static_cast<long double>(x[k]) - m.mean[k];
      for (std::size_t l = 0; l <= k; ++l) {
        const long double dl = static_cast<long double>(x[l]) - m.mean[l];
        s2[k * n + l] += static_cast<long double>(p) * dk * dl;
      }
    }
  });
  m.cov.assign(n * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = 0; l <= k; ++l) {
      const double c = static_cast<double>(s2[k * n + l] / mass);
      m.cov[k * n + l] = c;
      m.cov[l * n + k] = c;
    }
  }
  return m;
}

}  // namespace

StateVec find_max_state_monotone(const SparseDistribution& support, int r_star,
                                 const ModelSpec& spec) {
  if (r_star < 0) fail("jump budget R* must be nonnegative");
  return monotone_envelope(spec, support_max_of(support), r_star);
}

StateVec find_max_state_moments(const SparseDistribution& p_hat, double t, double delta,
                                double ell, const ModelSpec& spec) {
  if (!(delta >= 0.0)) fail("window length must be nonnegative");
  if (!(ell > 0.0)) fail("envelope width ell must be positive");
  const MomentState m0 = moments_of(p_hat, t, spec.dim());
  std::optional<StateVec> x = moment_envelope(spec, m0, delta, ell);
  if (!x) fail("moment envelope diverged over the requested window");
  return std::move(*x);
}

StepPlan choose_step(const ModelSpec& spec, int r_star, double t, double t_hi,
                     double epsilon, const SparseDistribution& support,
                     FindMaxMethod method, double ell) {
  if (method == FindMaxMethod::monotone) {
    const StateVec mono = find_max_state_monotone(support, r_star, spec);
    return plan_window(spec, r_star, t, t_hi, epsilon,
                       [&](double) { return std::optional<StateVec>(mono); });
  }
  if (!(ell > 0.0)) fail("envelope width ell must be positive");
  const MomentState m0 = moments_of(support, t, spec.dim());
  return plan_window(spec, r_star, t, t_hi, epsilon,
                     [&](double d) { return moment_envelope(spec, m0, d, ell); });
}

RetryDecision retry_on_exceed(const StepPlan& plan, const StateVec& observed,
                              double ell, double ell_cap) {
  const StateVec& xm = plan.lambda.x_max;
  bool outside = observed.size() != xm.size();
  for (std::size_t k = 0; !outside && k < xm.size(); ++k) {
    outside = observed[k] > xm[k];
  }
  RetryDecision d;
  d.ell = ell;
  if (!outside) return d;  // state was inside the envelope: nothing to widen
  d.retry = true;
  if (ell + 2.0 <= ell_cap) {
    d.ell = ell + 2.0;
  } else {
    d.fall_back_to_monotone = true;
  }
  return d;
}

SparseDistribution initial_distribution(const ModelSpec& spec) {
  SparseDistribution p;
  for (const auto& [x, w] : spec.initial) p.add(x, w);
  return p;
}

RunResult run(const ModelSpec& spec, const RunOptions& opts) {
  if (opts.r_star < 1) fail("r_star must be at least 1");
  if (!(opts.epsilon > 0.0 && opts.epsilon < 1.0)) fail("epsilon must lie in (0, 1)");
  if (!(opts.delta_threshold >= 0.0 && opts.delta_threshold < 1.0)) {
    fail("pruning threshold must lie in [0, 1)");
  }
  if (opts.findmax == FindMaxMethod::moments && !(opts.ell > 0.0)) {
    fail("envelope width ell must be positive");
  }
  const double t_end = opts.t_max.value_or(spec.horizon);
  if (!std::isfinite(t_end) || t_end < 0.0) fail("t_max must be finite and nonnegative");
  if (t_end > spec.horizon) fail("t_max exceeds the model horizon");
  if (opts.rho_budget && !(*opts.rho_budget > 0.0)) fail("prune budget must be positive");

  std::vector<double> cps = opts.checkpoints;
  std::sort(cps.begin(), cps.end());
  cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
  for (double c : cps) {
    if (!std::isfinite(c) || c < 0.0 || c > t_end) {
      fail("checkpoints must lie within [0, t_max]");
    }
  }

  RunResult res;
  res.ell_final = opts.ell;

  Workspace ws(spec);
  ws.load(initial_distribution(spec));

  std::size_t cp_idx = 0;
  const auto emit_due = [&](double tcur) {
    while (cp_idx < cps.size() && cps[cp_idx] <= tcur) {
      res.checkpoints.push_back({cps[cp_idx], ws.snapshot()});
      ++cp_idx;
    }
  };
  emit_due(0.0);

  double t = 0.0;
  double ell = opts.ell;
  while (t < t_end) {
    // Windows never cross a checkpoint, so emitted times are exact.
    const double t_hi = (cp_idx < cps.size() && cps[cp_idx] < t_end) ? cps[cp_idx] : t_end;
    const double t_prev = t;

    bool fallback = false;
    bool budget_retry = false;
    for (;;) {
      const FindMaxMethod method = fallback ? FindMaxMethod::monotone : opts.findmax;
      StepPlan plan;
      if (method == FindMaxMethod::monotone) {
        const StateVec mono = monotone_envelope(spec, ws.support_max(), opts.r_star);
        plan = plan_window(spec, opts.r_star, t, t_hi, opts.epsilon,
                           [&](double) { return std::optional<StateVec>(mono); });
      } else {
        const MomentState m0 = workspace_moments(ws, t, spec.dim());
        plan = plan_window(spec, opts.r_star, t, t_hi, opts.epsilon,
                           [&](double d) { return moment_envelope(spec, m0, d, ell); });
      }

      const auto handle_exceeded = [&](const StateVec& observed) {
        const RetryDecision d = retry_on_exceed(plan, observed, ell);
        if (!d.retry) {
          fail("uniformization rate failed to dominate a state inside the envelope");
        }
        ++res.envelope_retries;
        if (d.fall_back_to_monotone) {
          fallback = true;
          ++res.fallback_windows;
        } else {
          ell = d.ell;
        }
      };

      // Λ ≡ 0 on the window: no state under the envelope can fire, so the
      // whole span is inert — provided the envelope actually covers the
      // support (a too-narrow moment envelope is retried instead).
      if (plan.lambda(t) <= 0.0 && plan.lambda(t + plan.delta) <= 0.0) {
        bool covers = true;
        const StateVec& sm = ws.support_max();
        for (std::size_t k = 0; k < sm.size() && covers; ++k) {
          covers = sm[k] <= plan.lambda.x_max[k];
        }
        if (!covers) {
          handle_exceeded(ws.support_max());
          continue;
        }
        StepRecord rec;
        rec.t = t;
        rec.delta = plan.delta;
        rec.window_size = ws.support_size();
        res.ledger.record(rec);
        res.max_window_size = std::max(res.max_window_size, rec.window_size);
        t = plan.full_span ? t_hi : t + plan.delta;
        break;
      }

      Workspace::WindowControls ctl;
      ctl.delta_threshold =
          budget_retry ? opts.delta_threshold / 10.0 : opts.delta_threshold;
      ctl.exact_one_jump = opts.exact_one_jump;
      ctl.envelope = method == FindMaxMethod::moments ? &plan.lambda.x_max : nullptr;
      ctl.prune_budget = (opts.rho_budget && !budget_retry)
                             ? *opts.rho_budget * plan.delta / t_end
                             : -1.0;
      try {
        const Workspace::WindowStats st = ws.execute_window(plan, ctl);
        StepRecord rec;
        rec.t = t;
        rec.delta = plan.delta;
        rec.mu = plan.mu;
        rec.R = plan.truncation.R;
        rec.bounding_loss = st.bounding_loss;
        rec.poisson_loss = st.poisson_loss;
        rec.prune_loss = st.prune_loss;
        rec.window_size = st.window_size;
        res.ledger.record(rec);
        res.max_window_size = std::max(res.max_window_size, st.window_size);
        t = plan.full_span ? t_hi : t + plan.delta;
        break;
      } catch (const WindowExceeded& ex) {
        handle_exceeded(ex.state);
        continue;
      } catch (const PruneBudgetExceeded&) {
        if (budget_retry) {
          fail("prune budget exceeded again after tightening the threshold");
        }
        budget_retry = true;
        ++res.budget_retries;
        continue;
      }
    }

    if (!(t > t_prev)) fail("window length underflowed the time resolution");
    if (!(ws.mass() > 0.0L)) fail("all probability mass was lost to truncation");
    emit_due(t);
  }

  res.final_dist = ws.snapshot();
  res.final_time = t;
  res.ell_final = ell;
  return res;
}

}  // namespace unibound
