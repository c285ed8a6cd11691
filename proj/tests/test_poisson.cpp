#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "unibound/poisson.hpp"
#include "unibound/rate.hpp"
#include "unibound/types.hpp"

using namespace unibound;

namespace {

// Extended-precision Poisson pmf table. long double keeps e^{-1000} well
// above its underflow threshold, so direct iteration is exact to ~1e-18
// relative — far below the 1e-12 agreement this suite enforces.
std::vector<long double> pmf_oracle(long double mu, int upto) {
  std::vector<long double> p(static_cast<std::size_t>(upto) + 1);
  p[0] = expl(-mu);
  for (int i = 1; i <= upto; ++i) {
    p[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i) - 1] * mu / i;
  }
  return p;
}

int truncation_oracle(long double mu, long double epsilon) {
  long double cum = expl(-mu);
  long double term = cum;
  int r = 0;
  while (cum < 1.0L - epsilon) {
    ++r;
    term *= mu / r;
    cum += term;
  }
  return r;
}

UniformizationRate affine_rate(double a, double b) {
  UniformizationRate lam;
  lam.A = a;
  lam.B = b;
  return lam;
}

}  // namespace

TEST_CASE("step parameter integrates the rate over the window") {
  CHECK(step_parameter(affine_rate(2.0, 0.0), 5.0, 3.0) == doctest::Approx(6.0));
  CHECK(step_parameter(affine_rate(1.0, 1.0), 0.0, 2.0) == doctest::Approx(4.0));
  CHECK(step_parameter(affine_rate(1.0, 1.0), 0.0, 0.0) == 0.0);
}

TEST_CASE("step parameter is monotone in the window length") {
  double prev = 0.0;
  for (double d = 0.0; d <= 10.0; d += 0.25) {
    const double mu = step_parameter(affine_rate(0.3, 0.01), 1.0, d);
    CHECK(mu >= prev);
    prev = mu;
  }
}

TEST_CASE("step parameter rejects rates that vanish inside the window") {
  CHECK_THROWS_AS(step_parameter(affine_rate(1.0, -1.0), 0.0, 2.0), Error);
}

TEST_CASE("right truncation at pinned points") {
  CHECK(right_truncation(0.0, 1e-10) == 0);
  CHECK(right_truncation(0.0, 0.5) == 0);
  // e^{-1} ≈ 0.3679 < 0.5 but e^{-1}(1+1) ≈ 0.7358 ≥ 0.5.
  CHECK(right_truncation(1.0, 0.5) == 1);
}

TEST_CASE("right truncation exactly matches the extended-precision oracle") {
  for (double mu : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
    for (double eps : {1e-6, 1e-10}) {
      const int got = right_truncation(mu, eps);
      const int want = truncation_oracle(mu, eps);
      INFO("mu=", mu, " eps=", eps);
      CHECK(got == want);
    }
  }
}

TEST_CASE("right truncation is minimal") {
  for (double mu : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
    for (double eps : {1e-6, 1e-10}) {
      const int r = right_truncation(mu, eps);
      const auto pmf = pmf_oracle(mu, r);
      long double cum = 0.0L;
      for (int i = 0; i <= r; ++i) cum += pmf[static_cast<std::size_t>(i)];
      CHECK(static_cast<double>(cum) >= 1.0 - eps);
      if (r >= 1) {
        cum -= pmf[static_cast<std::size_t>(r)];
        CHECK(static_cast<double>(cum) < 1.0 - eps);
      }
    }
  }
}

TEST_CASE("right truncation is monotone in mu and epsilon") {
  int prev = 0;
  for (double mu = 0.0; mu <= 50.0; mu += 0.5) {
    const int r = right_truncation(mu, 1e-8);
    CHECK(r >= prev);
    prev = r;
  }
  for (double mu : {0.5, 3.0, 40.0, 800.0}) {
    CHECK(right_truncation(mu, 1e-6) <= right_truncation(mu, 1e-10));
  }
}

TEST_CASE("weights at pinned points") {
  CHECK(weights(0.0, 0) == std::vector<double>{1.0});

  const auto w = weights(1.0, 2);
  REQUIRE(w.size() == 3);
  CHECK(w[0] == doctest::Approx(0.36788).epsilon(1e-4));
  CHECK(w[1] == doctest::Approx(0.36788).epsilon(1e-4));
  CHECK(w[2] == doctest::Approx(0.18394).epsilon(1e-4));
}

TEST_CASE("weights agree with the extended-precision oracle to 1e-12") {
  for (double mu : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
    const int r = right_truncation(mu, 1e-10);
    const auto w = weights(mu, r);
    const auto ref = pmf_oracle(mu, r);
    REQUIRE(w.size() == static_cast<std::size_t>(r) + 1);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double want = static_cast<double>(ref[i]);
      INFO("mu=", mu, " i=", i);
      if (want > 1e-300) {
        CHECK(w[i] == doctest::Approx(want).epsilon(1e-12));
      } else {
        CHECK(w[i] <= 1e-290);
      }
    }
  }
}

TEST_CASE("weights stay finite and normalized for huge parameters") {
  for (double mu : {1000.0, 1e6}) {
    const int r = right_truncation(mu, 1e-10);
    const auto w = weights(mu, r);
    long double sum = 0.0L;
    for (double v : w) {
      REQUIRE(std::isfinite(v));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(static_cast<double>(sum) >= 1.0 - 1e-10);
    CHECK(static_cast<double>(sum) <= 1.0 + 1e-12);
  }
}

TEST_CASE("truncate bundles a consistent package") {
  for (double mu : {0.0, 0.05, 2.5, 300.0}) {
    const PoissonTruncation tr = truncate(mu, 1e-10);
    CHECK(tr.mu == mu);
    CHECK(tr.R == right_truncation(mu, 1e-10));
    CHECK(tr.weights.size() == static_cast<std::size_t>(tr.R) + 1);
    CHECK(tr.captured_mass >= 1.0 - 1e-10);
    CHECK(tr.captured_mass <= 1.0);
  }
}

TEST_CASE("truncation_within reports R only when it fits the budget") {
  const auto ok = truncation_within(0.05, 1e-10, 5);
  REQUIRE(ok.has_value());
  CHECK(*ok == right_truncation(0.05, 1e-10));
  CHECK(*ok <= 5);
  CHECK(!truncation_within(50.0, 1e-10, 5).has_value());
  // The budget boundary itself is allowed.
  const int r10 = right_truncation(0.45, 1e-10);
  const auto at = truncation_within(0.45, 1e-10, r10);
  REQUIRE(at.has_value());
  CHECK(*at == r10);
}
