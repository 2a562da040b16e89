#include <cmath>

#include "doctest.h"
#include "mkvflow/oracles.hpp"

using namespace mkv;

TEST_CASE("ou_variance closed form") {
  CHECK(ou_variance(0.0, 0.1) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(ou_variance(3.7, 1.0) == 1.0);
  CHECK(ou_variance(1.0, 0.1) == doctest::Approx(0.87819824508704858).epsilon(1e-14));
  // exact recursion sigma^2(t+dt) = e^{-2dt} sigma^2(t) + (1 - e^{-2dt})
  double s = 0.1;
  const double dt = 0.013;
  for (int k = 1; k <= 200; ++k) {
    s = ou_variance_step(s, dt);
    CHECK(s == doctest::Approx(ou_variance(k * dt, 0.1)).epsilon(1e-13));
  }
}

TEST_CASE("integrand closed forms") {
  CHECK(ou_integrand(1.7, 1.0) == 0.0);
  CHECK(nl_integrand(1.7, 1.0) == doctest::Approx(0.5 * 1.7 * 1.7 - 0.5).epsilon(1e-15));
  for (double x : {-2.0, -0.3, 0.0, 1.1}) {
    CHECK(ou_integrand(x, 0.35) >= 0.0);
  }
  // Gaussian expectation of both integrands is (sigma - 1/sigma)^2
  for (double s2 : {0.1, 0.35, 0.878, 1.0, 2.3}) {
    const double target = s2 - 2.0 + 1.0 / s2;
    // E[x^2] = s2 collapses both
    const double ou_mean = (1.0 - 1.0 / s2) * (1.0 - 1.0 / s2) * s2;
    const double nl_mean = (1.0 / (s2 * s2) + 0.5 - 1.0 / s2) * s2 + 0.5 * s2 - 1.0;
    CHECK(ou_mean == doctest::Approx(target).epsilon(1e-12));
    CHECK(nl_mean == doctest::Approx(target).epsilon(1e-12));
  }
  // sign threshold: integrand negative strictly inside, positive outside
  const double thr = nl_sign_threshold(0.878);
  CHECK(nl_integrand(std::sqrt(thr) * 0.99, 0.878) < 0.0);
  CHECK(nl_integrand(std::sqrt(thr) * 1.01, 0.878) > 0.0);
}

TEST_CASE("expected_dissipation: closed form and quadrature agree") {
  CHECK(expected_dissipation(0.0, 0.1, 1.0) == 0.0);
  CHECK(expected_dissipation(0.7, 1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-15));

  // frozen reference values (recomputed independently before the build)
  CHECK(expected_dissipation(1.0, 0.1, 1.0) ==
        doctest::Approx(0.69725196437188599).epsilon(1e-12));
  CHECK(expected_dissipation(0.5, 0.1, 1.0) ==
        doctest::Approx(0.031467666900044157).epsilon(1e-12));
  CHECK(expected_dissipation(0.25, 0.1, 1.0) ==
        doctest::Approx(0.0076335975563120835).epsilon(1e-12));

  // regeneration route: adaptive quadrature of the integrand
  for (double s : {0.1, 0.25, 0.5, 0.9, 1.0}) {
    for (double s0sq : {0.1, 0.5, 2.0}) {
      const double closed = expected_dissipation(s, s0sq, 1.0);
      const double quad = integrate_adaptive(
          [&](double t) {
            const double v = ou_variance(t, s0sq);
            const double sd = std::sqrt(v);
            return (sd - 1.0 / sd) * (sd - 1.0 / sd);
          },
          1.0 - s, 1.0, 1e-13);
      CHECK(std::abs(closed - quad) < 1e-9);
    }
  }
}

TEST_CASE("expected_dissipation is nondecreasing in s, zero iff stationary") {
  double prev = 0.0;
  for (double s = 0.05; s <= 1.0; s += 0.05) {
    const double v = expected_dissipation(s, 0.1, 1.0);
    CHECK(v >= prev);
    CHECK(v > 0.0);
    prev = v;
    CHECK(expected_dissipation(s, 1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("gaussian HWBI oracle") {
  SUBCASE("identical Gaussians vanish termwise") {
    const auto r = gaussian_hwbi_sides(0.3, 0.8, 0.3, 0.8, 1.0, 0.5);
    CHECK(r.lhs == 0.0);
    CHECK(r.term_derivative == 0.0);
    CHECK(r.w2_sq == 0.0);
    CHECK(r.bary_shift_sq == 0.0);
    CHECK(r.margin == 0.0);
  }
  SUBCASE("gaussian W2 closed form") {
    const auto r = gaussian_hwbi_sides(0.0, 1.0, 1.5, 0.4, 1.0, 1.0);
    CHECK(r.w2_sq == doctest::Approx(1.5 * 1.5 + 0.6 * 0.6).epsilon(1e-14));
  }
  SUBCASE("pure translation cancels the kappa_w terms") {
    const double c = 0.9;
    const auto r = gaussian_hwbi_sides(0.2, 0.7, 0.2 + c, 0.7, 1.3, 0.6);
    CHECK(r.w2_sq == doctest::Approx(c * c).epsilon(1e-14));
    CHECK(r.bary_shift_sq == doctest::Approx(c * c).epsilon(1e-14));
    // -(kv+kw)/2 W2^2 + kw/2 |db|^2 == -kv/2 c^2
    CHECK(r.term_w2 + r.term_bary == doctest::Approx(-0.5 * 1.3 * c * c).epsilon(1e-12));
  }
  SUBCASE("theorem margin is nonnegative over a random sweep") {
    std::uint64_t state = 88172645463325252ull;
    auto next = [&state]() {  // xorshift, just to scatter parameters
      state ^= state << 13;
      state ^= state >> 7;
      state ^= state << 17;
      return static_cast<double>(state >> 11) / 9007199254740992.0;
    };
    for (int i = 0; i < 500; ++i) {
      const double m0 = -1.5 + 3.0 * next();
      const double m1 = -1.5 + 3.0 * next();
      const double s0 = 0.4 + 1.4 * next();
      const double s1 = 0.4 + 1.4 * next();
      const double kv = 0.25 + 2.0 * next();
      const double kw = 0.25 + 2.0 * next();
      const auto r = gaussian_hwbi_sides(m0, s0, m1, s1, kv, kw);
      CHECK(r.margin >= -1e-10);
      CHECK(r.cs_rhs >= r.term_derivative - 1e-12);
      CHECK(r.cs_margin >= r.margin - 1e-12);
    }
  }
}
