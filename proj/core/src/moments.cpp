#include "unibound/moments.hpp"

#include <algorithm>
#include <cmath>

namespace unibound {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("moments: " + msg); }

}  // namespace

MomentState moments_of(const SparseDistribution& p, double t, std::size_t n) {
  const double mass = p.mass();
  if (!(mass > 0.0)) fail("cannot take moments of a zero-mass distribution");

  MomentState st;
  st.t = t;
  st.mean.assign(n, 0.0);
  st.cov.assign(n * n, 0.0);

  for (const auto& [x, prob] : p.entries()) {
    const double w = prob / mass;
    for (std::size_t k = 0; k < n; ++k) st.mean[k] += w * static_cast<double>(x[k]);
  }
  for (const auto& [x, prob] : p.entries()) {
    const double w = prob / mass;
    for (std::size_t k = 0; k < n; ++k) {
      const double dk = static_cast<double>(x[k]) - st.mean[k];
      for (std::size_t l = k; l < n; ++l) {
        const double dl = static_cast<double>(x[l]) - st.mean[l];
        st.cov[k * n + l] += w * dk * dl;
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = 0; l < k; ++l) st.cov[k * n + l] = st.cov[l * n + k];
  }
  return st;
}

void moment_derivatives(const ModelSpec& spec, const MomentState& state, double t,
                        std::vector<double>& d_mean, std::vector<double>& d_cov) {
  const std::size_t n = spec.dim();
  d_mean.assign(n, 0.0);
  d_cov.assign(n * n, 0.0);

  std::vector<double> cov_with_rate(n);
  for (const TransitionClass& cls : spec.classes) {
    const StateFactor& sf = cls.state_factor;
    if (sf.degree() > 2) {
      fail("moment closure requires rates of degree at most 2 (class '" +
           cls.name + "')");
    }
    const double lam = cls.time_factor(t);

    // Value, gradient, and Hessian of the monomial at the mean. With degree
    // ≤ 2 there are at most two participating species p and q (possibly
    // equal); the Hessian contributes ½ Σ H_kl C_kl to ⟨α⟩.
    std::size_t p = n, q = n;
    for (std::size_t k = 0; k < n; ++k) {
      for (int e = 0; e < sf.exponents[k]; ++e) {
        if (p == n) {
          p = k;
        } else {
          q = k;
        }
      }
    }
    double value = sf.constant;
    double grad_p = 0.0, grad_q = 0.0;
    double hess_corr = 0.0;
    if (p != n && q == n) {  // c·x_p
      value *= state.mean[p];
      grad_p = sf.constant;
    } else if (p != n && q != n && q != p) {  // c·x_p·x_q
      value = sf.constant * state.mean[p] * state.mean[q];
      grad_p = sf.constant * state.mean[q];
      grad_q = sf.constant * state.mean[p];
      hess_corr = sf.constant * state.c(p, q, n);
    } else if (p != n && q == p) {  // c·x_p²
      value = sf.constant * state.mean[p] * state.mean[p];
      grad_p = 2.0 * sf.constant * state.mean[p];
      hess_corr = sf.constant * state.c(p, p, n);
    }
    const double mean_rate = lam * (value + hess_corr);

    // Cov(X_k, α) ≈ λ Σ_r ∂α/∂x_r(E) · C_kr (first-order closure).
    for (std::size_t k = 0; k < n; ++k) {
      double cv = 0.0;
      if (p != n) cv += grad_p * state.c(k, p, n);
      if (q != n && q != p) cv += grad_q * state.c(k, q, n);
      cov_with_rate[k] = lam * cv;
    }

    for (std::size_t k = 0; k < n; ++k) {
      const double wk = static_cast<double>(cls.change[k]);
      if (wk != 0.0) d_mean[k] += wk * mean_rate;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double wk = static_cast<double>(cls.change[k]);
      for (std::size_t l = 0; l < n; ++l) {
        const double wl = static_cast<double>(cls.change[l]);
        if (wk == 0.0 && wl == 0.0) continue;
        d_cov[k * n + l] +=
            wk * cov_with_rate[l] + wl * cov_with_rate[k] + wk * wl * mean_rate;
      }
    }
  }
}

MomentState integrate_moments_observed(const ModelSpec& spec, MomentState state,
                                       double t1, int steps,
                                       MomentGridObserver observer, void* ctx) {
  if (steps < 1) fail("integration needs at least one step");
  const std::size_t n = spec.dim();
  const double h = (t1 - state.t) / steps;
  if (observer != nullptr) observer(state, ctx);
  if (h == 0.0) return state;

  std::vector<double> k1m, k1c, k2m, k2c, k3m, k3c, k4m, k4c;
  MomentState tmp = state;
  for (int s = 0; s < steps; ++s) {
    const double t = state.t;
    moment_derivatives(spec, state, t, k1m, k1c);

    tmp.t = t + 0.5 * h;
    for (std::size_t i = 0; i < n; ++i) tmp.mean[i] = state.mean[i] + 0.5 * h * k1m[i];
    for (std::size_t i = 0; i < n * n; ++i) tmp.cov[i] = state.cov[i] + 0.5 * h * k1c[i];
    moment_derivatives(spec, tmp, tmp.t, k2m, k2c);

    for (std::size_t i = 0; i < n; ++i) tmp.mean[i] = state.mean[i] + 0.5 * h * k2m[i];
    for (std::size_t i = 0; i < n * n; ++i) tmp.cov[i] = state.cov[i] + 0.5 * h * k2c[i];
    moment_derivatives(spec, tmp, tmp.t, k3m, k3c);

    tmp.t = t + h;
    for (std::size_t i = 0; i < n; ++i) tmp.mean[i] = state.mean[i] + h * k3m[i];
    for (std::size_t i = 0; i < n * n; ++i) tmp.cov[i] = state.cov[i] + h * k3c[i];
    moment_derivatives(spec, tmp, tmp.t, k4m, k4c);

    for (std::size_t i = 0; i < n; ++i) {
      state.mean[i] += h / 6.0 * (k1m[i] + 2.0 * k2m[i] + 2.0 * k3m[i] + k4m[i]);
      if (!std::isfinite(state.mean[i])) fail("moment integration diverged");
    }
    for (std::size_t i = 0; i < n * n; ++i) {
      state.cov[i] += h / 6.0 * (k1c[i] + 2.0 * k2c[i] + 2.0 * k3c[i] + k4c[i]);
      if (!std::isfinite(state.cov[i])) fail("moment integration diverged");
    }
    state.t = t + h;
    if (observer != nullptr) observer(state, ctx);
  }
  state.t = t1;
  return state;
}

MomentState integrate_moments(const ModelSpec& spec, MomentState state, double t1,
                              int steps) {
  return integrate_moments_observed(spec, std::move(state), t1, steps, nullptr,
                                    nullptr);
}

}  // namespace unibound
