#include "unibound/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace unibound {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("poisson: " + msg); }

// Minimal right point by direct upward pmf summation in extended precision.
// Safe for moderate μ (e^{-μ} representable as long double far beyond the
// μ ≤ 64 range this is used for).
int right_truncation_direct(double mu, double epsilon) {
  const long double target = 1.0L - static_cast<long double>(epsilon);
  long double w = std::exp(static_cast<long double>(-mu));
  long double cum = w;
  int r = 0;
  while (cum < target) {
    ++r;
    w *= mu / r;
    cum += w;
    if (r > 10'000'000) fail("right truncation did not converge");
  }
  return r;
}

// Scaled pmf profile around the mode for large μ: q_mode = 1 and neighbours
// via the ratio recurrence, so nothing underflows even when e^{-μ} would.
struct ScaledProfile {
  int lo = 0;
  std::vector<long double> q;  // q[i - lo] ∝ pmf(i; μ)
  long double total = 0.0L;    // Σ q  (pmf(i) = q[i-lo] / total up to tail clipping)
};

ScaledProfile scaled_profile(double mu) {
  const int mode = static_cast<int>(std::floor(mu));
  const long double lmu = mu;

  std::vector<long double> up;  // mode, mode+1, ...
  up.push_back(1.0L);
  for (int i = mode + 1;; ++i) {
    const long double next = up.back() * (lmu / i);
    if (next < 1e-40L && i > mu) break;
    up.push_back(next);
  }
  std::vector<long double> down;  // mode-1, mode-2, ...
  {
    long double w = 1.0L;
    for (int i = mode; i > 0; --i) {
      w *= i / lmu;
      if (w < 1e-40L) break;
      down.push_back(w);
    }
  }

  ScaledProfile prof;
  prof.lo = mode - static_cast<int>(down.size());
  prof.q.assign(down.rbegin(), down.rend());
  prof.q.insert(prof.q.end(), up.begin(), up.end());
  // Sum small-to-large from both flanks for an accurate total.
  long double total = 0.0L;
  std::size_t a = 0, b = prof.q.size();
  while (a < b) {
    if (prof.q[a] <= prof.q[b - 1]) {
      total += prof.q[a++];
    } else {
      total += prof.q[--b];
    }
  }
  prof.total = total;
  return prof;
}

}  // namespace

double step_parameter(const UniformizationRate& lambda, double t, double delta) {
  if (delta < 0.0) fail("negative step length");
  if (lambda(t) < 0.0 || lambda(t + delta) < 0.0) {
    std::ostringstream os;
    os << "uniformization rate is negative on [" << t << ", " << t + delta << "]";
    fail(os.str());
  }
  return lambda.integral(t, delta);
}

int right_truncation(double mu, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) fail("epsilon must lie in (0, 1)");
  if (mu < 0.0 || !std::isfinite(mu)) fail("mu must be finite and non-negative");
  if (mu == 0.0) return 0;
  if (mu <= 64.0) return right_truncation_direct(mu, epsilon);

  const ScaledProfile prof = scaled_profile(mu);
  // Find the smallest R whose tail Σ_{i>R} pmf ≤ ε by accumulating the tail
  // from the top; summing the tail directly avoids the cancellation a
  // CDF-minus-one evaluation would suffer.
  const long double limit = static_cast<long double>(epsilon) * prof.total;
  long double tail = 0.0L;
  for (int idx = static_cast<int>(prof.q.size()) - 1; idx >= 0; --idx) {
    if (tail + prof.q[idx] > limit) return prof.lo + idx;
    tail += prof.q[idx];
  }
  return 0;  // ε keeps no terms beyond i=0 (unreachable for ε < 1)
}

std::vector<double> weights(double mu, int R) {
  if (R < 0) fail("right point must be non-negative");
  std::vector<double> w(static_cast<std::size_t>(R) + 1);
  if (mu == 0.0) {
    w[0] = 1.0;
    return w;
  }
  const long double lmu = mu;
  const long double log_mu = std::log(lmu);
  for (int i = 0; i <= R; ++i) {
    const long double lp = -lmu + i * log_mu - std::lgamma(static_cast<long double>(i) + 1.0L);
    w[static_cast<std::size_t>(i)] =
        static_cast<double>(std::min(1.0L, std::exp(lp)));
  }
  return w;
}

PoissonTruncation truncate(double mu, double epsilon) {
  PoissonTruncation tr;
  tr.mu = mu;
  tr.R = right_truncation(mu, epsilon);
  tr.weights = weights(mu, tr.R);
  NeumaierSum sum;
  for (double w : tr.weights) sum.add(w);
  tr.captured_mass = std::min(1.0, sum.value());
  return tr;
}

std::optional<int> truncation_within(double mu, double epsilon, int r_star) {
  if (mu < 0.0 || !std::isfinite(mu)) fail("mu must be finite and non-negative");
  if (r_star < 0) return std::nullopt;
  // The Poisson median is at least μ − ln 2, so μ ≥ R* + 2 puts the median
  // beyond R* and the captured mass below 1/2 < 1 − ε.
  if (mu >= r_star + 2.0) return std::nullopt;
  if (mu == 0.0) return 0;

  const long double target = 1.0L - static_cast<long double>(epsilon);
  long double w = std::exp(static_cast<long double>(-mu));
  long double cum = w;
  int r = 0;
  while (cum < target) {
    ++r;
    if (r > r_star) return std::nullopt;
    w *= mu / r;
    cum += w;
  }
  return r;
}

}  // namespace unibound
