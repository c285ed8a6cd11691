#include "unibound/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace unibound {
namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("oracle: " + msg); }

constexpr std::size_t kMaxBoxStates = 50'000'000;

}  // namespace

std::size_t StateBox::size() const {
  std::size_t n = 1;
  for (Count u : upper) {
    if (u < 0) fail("box upper bounds must be nonnegative");
    const auto w = static_cast<std::size_t>(u) + 1;
    if (n > kMaxBoxStates / w) fail("box has too many states to enumerate");
    n *= w;
  }
  return n;
}

bool StateBox::contains(const StateVec& x) const {
  if (x.size() != upper.size()) return false;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] < 0 || x[k] > upper[k]) return false;
  }
  return true;
}

std::size_t StateBox::index_of(const StateVec& x) const {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < upper.size(); ++k) {
    idx = idx * (static_cast<std::size_t>(upper[k]) + 1) + static_cast<std::size_t>(x[k]);
  }
  return idx;
}

StateVec StateBox::state_of(std::size_t idx) const {
  StateVec x(upper.size());
  for (std::size_t k = upper.size(); k-- > 0;) {
    const auto w = static_cast<std::size_t>(upper[k]) + 1;
    x[k] = static_cast<Count>(idx % w);
    idx /= w;
  }
  return x;
}

std::vector<std::pair<StateVec, double>> generator_row(const StateVec& x, double t,
                                                       const StateBox& box,
                                                       const ModelSpec& spec) {
  if (!box.contains(x)) fail("generator_row: state lies outside the box");
  std::vector<std::pair<StateVec, double>> row;
  NeumaierSum out;
  for (std::size_t j = 0; j < spec.classes.size(); ++j) {
    const double a = rate(spec, j, x, t);
    if (a <= 0.0) continue;
    StateVec target = x;
    for (std::size_t k = 0; k < target.size(); ++k) target[k] += spec.classes[j].change[k];
    if (!box.contains(target)) continue;  // dropped: reflecting-by-omission
    row.emplace_back(std::move(target), a);
    out.add(a);
  }
  row.emplace_back(x, -out.value());
  return row;
}

namespace {

/// Generator compiled over the box: every retained off-diagonal rate is
/// affine in t (r_j(x)·(a_j + b_j·t)), as are the per-state diagonal and the
/// dropped-outflux coefficients.
struct CompiledGenerator {
  std::size_t n_states = 0;
  std::vector<std::uint32_t> src, dst;
  std::vector<double> va, vb;      // off-diagonal affine rates
  std::vector<double> da, db;      // retained exit rate per state (positive)
  std::vector<double> ba, bb;      // dropped (out-of-box) outflux per state

  void rhs(double t, const std::vector<double>& y, std::vector<double>& dy) const {
    std::fill(dy.begin(), dy.end(), 0.0);
    const std::size_t nnz = src.size();
    for (std::size_t e = 0; e < nnz; ++e) {
      dy[dst[e]] += (va[e] + vb[e] * t) * y[src[e]];
    }
    double boundary = 0.0;
    for (std::size_t i = 0; i < n_states; ++i) {
      dy[i] -= (da[i] + db[i] * t) * y[i];
      boundary += (ba[i] + bb[i] * t) * y[i];
    }
    dy[n_states] = boundary;  // accumulated would-be outflux
  }
};

CompiledGenerator compile_generator(const ModelSpec& spec, const StateBox& box) {
  const std::size_t n = box.size();
  CompiledGenerator g;
  g.n_states = n;
  g.da.assign(n, 0.0);
  g.db.assign(n, 0.0);
  g.ba.assign(n, 0.0);
  g.bb.assign(n, 0.0);
  StateVec x(box.upper.size(), 0);
  StateVec target(box.upper.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const TransitionClass& c : spec.classes) {
      if (!c.enabled(x)) continue;
      const double r = c.state_factor(x);
      if (r <= 0.0) continue;
      bool inside = true;
      for (std::size_t k = 0; k < x.size(); ++k) {
        target[k] = x[k] + c.change[k];
        if (target[k] < 0 || target[k] > box.upper[k]) inside = false;
      }
      const double a = r * c.time_factor.a;
      const double b = r * c.time_factor.b;
      if (inside) {
        g.src.push_back(static_cast<std::uint32_t>(i));
        g.dst.push_back(static_cast<std::uint32_t>(box.index_of(target)));
        g.va.push_back(a);
        g.vb.push_back(b);
        g.da[i] += a;
        g.db[i] += b;
      } else {
        g.ba[i] += a;
        g.bb[i] += b;
      }
    }
    // Odometer increment: next state in lexicographic order.
    for (std::size_t k = x.size(); k-- > 0;) {
      if (x[k] < box.upper[k]) {
        ++x[k];
        break;
      }
      x[k] = 0;
    }
  }
  return g;
}

// Dormand–Prince 5(4) tableau (FSAL: the 7th stage is the next step's 1st).
constexpr double kC2 = 1.0 / 5, kC3 = 3.0 / 10, kC4 = 4.0 / 5, kC5 = 8.0 / 9;
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187, kA53 = 64448.0 / 6561,
                 kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192,
                 kB5 = -2187.0 / 6784, kB6 = 11.0 / 84;
// b − b̂ (5th-order weights minus the embedded 4th-order ones).
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                 kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;

}  // namespace

ReferenceSolution integrate_forward(const ModelSpec& spec, const SparseDistribution& p0,
                                    double t0, double t1, const StateBox& box,
                                    double tol) {
  if (box.upper.size() != spec.dim()) fail("box dimension does not match the model");
  if (!(tol > 0.0)) fail("tolerance must be positive");
  if (!(t1 >= t0)) fail("integration must run forward in time");
  const std::size_t n = box.size();

  std::vector<double> y(n + 1, 0.0);
  for (const auto& [x, p] : p0.entries()) {
    if (!box.contains(x)) fail("initial support lies outside the box");
    y[box.index_of(x)] += p;
  }
  const double mass0 = [&] {
    NeumaierSum s;
    for (std::size_t i = 0; i < n; ++i) s.add(y[i]);
    return s.value();
  }();

  ReferenceSolution out;
  out.box = box;
  out.t = t1;

  if (t1 > t0) {
    const CompiledGenerator g = compile_generator(spec, box);
    const std::size_t dim = n + 1;
    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim),
        ytmp(dim), y5(dim);

    const double span = t1 - t0;
    const double rtol = tol;
    const double atol = std::max(1e-14, tol * 1e-4);
    double t = t0;
    double h = span * 1e-3;
    double err_prev = 1.0;
    bool last = false;
    std::size_t steps = 0;

    g.rhs(t, y, k1);
    while (!last) {
      if (++steps > 5'000'000) fail("integration exceeded the step budget");
      if (t + h >= t1) {
        h = t1 - t;
        last = true;
      }
      if (!(h > 0.0) || h < 16.0 * 2.220446049250313e-16 * std::max(std::abs(t), span)) {
        fail("step-size underflow");
      }

      for (std::size_t i = 0; i < dim; ++i) ytmp[i] = y[i] + h * kA21 * k1[i];
      g.rhs(t + kC2 * h, ytmp, k2);
      for (std::size_t i = 0; i < dim; ++i) {
        ytmp[i] = y[i] + h * (kA31 * k1[i] + kA32 * k2[i]);
      }
      g.rhs(t + kC3 * h, ytmp, k3);
      for (std::size_t i = 0; i < dim; ++i) {
        ytmp[i] = y[i] + h * (kA41 * k1[i] + kA42 * k2[i] + kA43 * k3[i]);
      }
      g.rhs(t + kC4 * h, ytmp, k4);
      for (std::size_t i = 0; i < dim; ++i) {
        ytmp[i] = y[i] + h * (kA51 * k1[i] + kA52 * k2[i] + kA53 * k3[i] + kA54 * k4[i]);
      }
      g.rhs(t + kC5 * h, ytmp, k5);
      for (std::size_t i = 0; i < dim; ++i) {
        ytmp[i] = y[i] + h * (kA61 * k1[i] + kA62 * k2[i] + kA63 * k3[i] +
                              kA64 * k4[i] + kA65 * k5[i]);
      }
      g.rhs(t + h, ytmp, k6);
      for (std::size_t i = 0; i < dim; ++i) {
        y5[i] = y[i] + h * (kB1 * k1[i] + kB3 * k3[i] + kB4 * k4[i] + kB5 * k5[i] +
                            kB6 * k6[i]);
      }
      g.rhs(t + h, y5, k7);

      double err_sq = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double e = h * (kE1 * k1[i] + kE3 * k3[i] + kE4 * k4[i] + kE5 * k5[i] +
                              kE6 * k6[i] + kE7 * k7[i]);
        const double scale = atol + rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
        err_sq += (e / scale) * (e / scale);
      }
      const double err = std::sqrt(err_sq / static_cast<double>(dim));

      if (err <= 1.0) {
        t = last ? t1 : t + h;
        y.swap(y5);
        k1.swap(k7);
        // PI step-size controller (growth capped harder right after a reject).
        double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) *
                     std::pow(err_prev, 0.4 / 5.0);
        fac = std::min(5.0, std::max(0.2, fac));
        h *= fac;
        err_prev = std::max(err, 1e-10);
      } else {
        last = false;
        h *= std::min(0.9, std::max(0.2, 0.9 * std::pow(err, -0.2)));
      }
    }
  }

  // Tiny negative undershoot is integrator noise; the conservation check
  // below catches anything material.
  out.p.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
  for (double& v : out.p) v = std::max(v, 0.0);
  out.boundary_mass = std::max(y[n], 0.0);

  NeumaierSum mass;
  for (double v : out.p) mass.add(v);
  if (std::abs(mass.value() - mass0) > 10.0 * tol) {
    fail("mass conservation drifted beyond 10x the tolerance");
  }
  return out;
}

UnderApproxReport verify_underapprox(const SparseDistribution& p_hat,
                                     const ReferenceSolution& ref, double slack) {
  if (!(slack >= 0.0)) fail("slack must be nonnegative");
  UnderApproxReport report;
  report.boundary_mass = ref.boundary_mass;
  bool first = true;
  for (const auto& [x, p] : p_hat.entries()) {
    const double r = ref.at(x);
    const double excess = p - r;
    if (first || excess > report.worst_excess) {
      report.worst_excess = excess;
      first = false;
    }
    if (excess > slack) report.violations.push_back({x, p, r});
  }
  // Deterministic report order regardless of hash iteration.
  std::sort(report.violations.begin(), report.violations.end(),
            [](const Violation& a, const Violation& b) { return lex_less(a.state, b.state); });
  return report;
}

}  // namespace unibound
