#include "unibound/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace unibound {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("engine: " + msg); }

// Tolerance for floating-point noise when checking probability bounds.
constexpr double kBoundSlack = 1e-12;

}  // namespace

double jump_bound(const ModelSpec& spec, std::size_t j, const StateVec& x,
                  const StepPlan& plan) {
  if (j >= spec.classes.size()) fail("class index out of range");
  const TransitionClass& c = spec.classes[j];
  if (!c.enabled(x)) return 0.0;
  const double r = c.state_factor(x);
  if (r == 0.0) return 0.0;

  // λ_j(t)/Λ(t) is a ratio of affines sharing the window's Λ, so its extrema
  // over [t0, t1] sit at the endpoints.
  const double t0 = plan.t_start;
  const double t1 = plan.t_start + plan.delta;
  double ratio = std::numeric_limits<double>::infinity();
  for (double t : {t0, t1}) {
    const double lam = plan.lambda(t);
    if (lam <= 0.0) fail("uniformization rate vanishes while a class is live");
    ratio = std::min(ratio, c.time_factor(t) / lam);
  }
  return r * ratio;
}

double self_loop_bound(const ModelSpec& spec, const StateVec& y, const StepPlan& plan) {
  // Exit rate of y as an affine function na + nb·t over the enabled classes.
  double na = 0.0, nb = 0.0;
  for (const TransitionClass& c : spec.classes) {
    if (!c.enabled(y)) continue;
    const double r = c.state_factor(y);
    na += r * c.time_factor.a;
    nb += r * c.time_factor.b;
  }
  if (na == 0.0 && nb == 0.0) return 1.0;  // nothing enabled: absorbing in-window

  const double t0 = plan.t_start;
  const double t1 = plan.t_start + plan.delta;
  double worst = 0.0;
  for (double t : {t0, t1}) {
    const double lam = plan.lambda(t);
    if (lam <= 0.0) fail("uniformization rate vanishes while a class is live");
    worst = std::max(worst, (na + nb * t) / lam);
  }
  const double u0 = 1.0 - worst;
  if (u0 < -kBoundSlack) {
    std::ostringstream os;
    os << "self-loop bound is negative (" << u0
       << "): the dominating state does not cover this state's exit rate";
    fail(os.str());
  }
  return std::max(u0, 0.0);
}

DtmcStepResult dtmc_step(const ModelSpec& spec, const SparseDistribution& v,
                         const StepPlan& plan, double delta_threshold) {
  DtmcStepResult res;
  NeumaierSumT<long double> in_mass;
  for (const auto& [x, p] : v.entries()) {
    in_mass.add(p);
    double row = 0.0;
    for (std::size_t j = 0; j < spec.classes.size(); ++j) {
      const double uj = jump_bound(spec, j, x, plan);
      if (uj == 0.0) continue;
      if (uj < 0.0 || uj > 1.0 + kBoundSlack) fail("jump bound outside [0, 1]");
      StateVec y = x;
      for (std::size_t k = 0; k < y.size(); ++k) y[k] += spec.classes[j].change[k];
      res.next.add(std::move(y), p * uj);
      row += uj;
    }
    const double u0 = self_loop_bound(spec, x, plan);
    if (row + u0 > 1.0 + kBoundSlack) fail("DTMC row mass exceeds 1");
    res.next.add(x, p * u0);
  }
  res.prune_loss = res.next.prune(delta_threshold);
  const long double out_mass = static_cast<long double>(res.next.mass());
  res.step_defect = std::max(
      0.0, static_cast<double>(in_mass.value() - out_mass -
                               static_cast<long double>(res.prune_loss)));
  return res;
}

SparseDistribution accumulate(const std::vector<SparseDistribution>& v_sequence,
                              const std::vector<double>& weights) {
  if (v_sequence.size() > weights.size()) {
    fail("accumulate: more vectors than Poisson weights");
  }
  SparseDistribution out;
  for (std::size_t i = 0; i < v_sequence.size(); ++i) {
    for (const auto& [x, p] : v_sequence[i].entries()) {
      out.add(x, weights[i] * p);
    }
  }
  return out;
}

SparseDistribution single_jump_term(const ModelSpec& spec,
                                    const SparseDistribution& v0,
                                    const StepPlan& plan) {
  const double t_mid = plan.t_start + 0.5 * plan.delta;
  const double emu = std::exp(-plan.mu);

  // Per-class ∫ λ_j over the window (midpoint rule is exact for affine λ).
  std::vector<double> integral(spec.classes.size());
  for (std::size_t j = 0; j < spec.classes.size(); ++j) {
    integral[j] = plan.delta * spec.classes[j].time_factor(t_mid);
  }

  SparseDistribution out;
  for (const auto& [x, p] : v0.entries()) {
    double stay = plan.mu;
    for (std::size_t j = 0; j < spec.classes.size(); ++j) {
      const TransitionClass& c = spec.classes[j];
      if (!c.enabled(x)) continue;
      const double rI = c.state_factor(x) * integral[j];
      if (rI == 0.0) continue;
      stay -= rI;
      StateVec y = x;
      for (std::size_t k = 0; k < y.size(); ++k) y[k] += c.change[k];
      out.add(std::move(y), emu * p * rI);
    }
    // stay = ∫(Λ − exit rate of x) ≥ 0 whenever Λ dominates the window.
    if (stay < -kBoundSlack * std::max(1.0, plan.mu)) {
      fail("single-jump stay weight is negative: Λ does not dominate");
    }
    out.add(x, emu * p * std::max(stay, 0.0));
  }
  return out;
}

double total_error(const SparseDistribution& p) {
  return std::clamp(1.0 - p.mass(), 0.0, 1.0);
}

}  // namespace unibound
