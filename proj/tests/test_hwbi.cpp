#include <cmath>

#include "doctest.h"
#include "mkvflow/hwbi.hpp"
#include "mkvflow/oracles.hpp"

using namespace mkv;

namespace {

GridDensity gaussian_pair_grid(double m, double s, double lo, double hi) {
  return gaussian_density_on_grid({m, s * s}, lo, hi, 2048);
}

}  // namespace

TEST_CASE("entropy derivative at t = 0") {
  const auto v = quadratic_potential<1>(1.0);
  const auto w0 = zero_interaction<1>();

  SUBCASE("equal endpoints give zero") {
    const auto g = gaussian_pair_grid(0.2, 0.9, -8.0, 8.0);
    CHECK(entropy_derivative_at_zero(g, g, v, w0) == 0.0);
  }
  SUBCASE("gaussian pair matches the closed form") {
    const double m0 = 0.3, s0 = 1.0, m1 = -0.4, s1 = 0.6;
    const auto nu0 = gaussian_pair_grid(m0, s0, -9.0, 9.0);
    const auto nu1 = gaussian_pair_grid(m1, s1, -9.0, 9.0);
    const auto oracle = gaussian_hwbi_sides(m0, s0, m1, s1, 1.0, 0.0);
    const double d = entropy_derivative_at_zero(nu0, nu1, v, w0);
    CHECK(d == doctest::Approx(-oracle.term_derivative).epsilon(1e-3));
  }
  SUBCASE("forward difference of the interpolated entropy agrees") {
    const auto w = quadratic_interaction<1>(0.5);
    const auto nu0 = gaussian_pair_grid(0.0, 0.8, -9.0, 9.0);
    const auto nu1 = gaussian_pair_grid(0.9, 1.1, -9.0, 9.0);
    const double d = entropy_derivative_at_zero(nu0, nu1, quadratic_potential<1>(1.0), w);
    const double t = 1e-2;
    const auto nut = displacement_interpolation(nu0, nu1, t);
    const double h0 = relative_entropy(nu0, quadratic_potential<1>(1.0), w, EntropyReference::Q);
    const double ht = relative_entropy(nut, quadratic_potential<1>(1.0), w, EntropyReference::Q);
    CHECK((ht - h0) / t == doctest::Approx(d).epsilon(0.05));
  }
}

TEST_CASE("convexity profile") {
  const double m0 = -0.4, s0 = 0.7, m1 = 0.8, s1 = 1.2;
  const auto nu0 = gaussian_pair_grid(m0, s0, -10.0, 10.0);
  const auto nu1 = gaussian_pair_grid(m1, s1, -10.0, 10.0);
  const double kv = 1.3;
  const auto v = quadratic_potential<1>(kv);
  const auto w = quadratic_interaction<1>(0.6);
  const auto prof = convexity_profile(nu0, nu1, v, w, 33);
  const double w2sq = wasserstein2(nu0, nu1) * wasserstein2(nu0, nu1);

  SUBCASE("internal energy is displacement convex") {
    CHECK(prof.f_dd.minCoeff() >= -1e-3);
  }
  SUBCASE("quadratic confinement is exactly quadratic along the geodesic") {
    for (Eigen::Index j = 0; j < prof.g_dd.size(); ++j) {
      CHECK(prof.g_dd(j) == doctest::Approx(kv * w2sq).epsilon(1e-3));
    }
  }
  SUBCASE("centered pair: interaction second derivative is kw W2^2") {
    const auto c0 = gaussian_pair_grid(0.0, 0.7, -10.0, 10.0);
    const auto c1 = gaussian_pair_grid(0.0, 1.2, -10.0, 10.0);
    const double kw = 0.8;
    const auto cprof = convexity_profile(c0, c1, zero_potential<1>(),
                                         quadratic_interaction<1>(kw), 33);
    const double cw2 = wasserstein2(c0, c1);
    for (Eigen::Index j = 0; j < cprof.h_dd.size(); ++j) {
      CHECK(cprof.h_dd(j) == doctest::Approx(kw * cw2 * cw2).epsilon(2e-3));
    }
  }
  SUBCASE("taylor reconstruction of the entropy difference") {
    // F(1) - F(0) = F'(0+) + int_0^1 (1-t) F''(t) dt, with the curvature
    // integrand extended to the endpoints by linear extrapolation
    const auto fine = convexity_profile(nu0, nu1, v, w, 65);
    const auto total = fine.total();
    const double df = total(total.size() - 1) - total(0);
    const double d0 = entropy_derivative_at_zero(nu0, nu1, v, w);
    const double dt = fine.t(1) - fine.t(0);
    const Eigen::Index n_dd = fine.f_dd.size();
    Eigen::ArrayXd fdd(n_dd + 2);
    for (Eigen::Index j = 0; j < n_dd; ++j) {
      fdd(j + 1) = fine.f_dd(j) + fine.g_dd(j) + fine.h_dd(j);
    }
    fdd(0) = 2.0 * fdd(1) - fdd(2);
    fdd(n_dd + 1) = 2.0 * fdd(n_dd) - fdd(n_dd - 1);
    double integral = 0.0;
    for (Eigen::Index j = 0; j + 1 < fdd.size(); ++j) {
      const double ta = fine.t(j);
      const double tb = fine.t(j + 1);
      integral += 0.5 * dt * ((1.0 - ta) * fdd(j) + (1.0 - tb) * fdd(j + 1));
    }
    CHECK(std::abs(df - d0 - integral) < 1e-3 * std::max(1.0, std::abs(df)));
  }
}

TEST_CASE("hwbi inequality") {
  SUBCASE("equal endpoints vanish termwise") {
    const auto g = gaussian_pair_grid(0.1, 0.8, -8.0, 8.0);
    const auto rep = hwbi_check(g, g, quadratic_potential<1>(1.0), quadratic_interaction<1>(0.5));
    CHECK(rep.lhs == 0.0);
    CHECK(rep.term_derivative == 0.0);
    CHECK(rep.term_w2 == 0.0);
    CHECK(rep.term_bary == 0.0);
    CHECK(rep.margin == 0.0);
  }
  SUBCASE("random gaussian pairs track the closed-form oracle") {
    for (int c = 0; c < 10; ++c) {
      const double m0 = -1.0 + 0.21 * c;
      const double m1 = 0.9 - 0.17 * c;
      const double s0 = 0.5 + 0.08 * c;
      const double s1 = 1.4 - 0.07 * c;
      const double kv = 0.4 + 0.1 * c;
      const double kw = 1.6 - 0.1 * c;
      const double lo = std::min(m0, m1) - 8.0 * std::max(s0, s1);
      const double hi = std::max(m0, m1) + 8.0 * std::max(s0, s1);
      const auto nu0 = gaussian_pair_grid(m0, s0, lo, hi);
      const auto nu1 = gaussian_pair_grid(m1, s1, lo, hi);
      const auto rep = hwbi_check(nu0, nu1, quadratic_potential<1>(kv),
                                  quadratic_interaction<1>(kw));
      const auto oracle = gaussian_hwbi_sides(m0, s0, m1, s1, kv, kw);
      CHECK(oracle.margin >= -1e-10);
      CHECK(std::abs(rep.lhs - oracle.lhs) < 1e-3);
      CHECK(std::abs(rep.term_derivative - oracle.term_derivative) < 1e-3);
      CHECK(std::abs(rep.term_w2 - oracle.term_w2) < 1e-3);
      CHECK(std::abs(rep.term_bary - oracle.term_bary) < 1e-3);
      CHECK(std::abs(rep.margin - oracle.margin) < 2e-3);
      CHECK(rep.cs_rhs >= rep.term_derivative - 1e-12);
      CHECK(rep.cs_margin >= rep.margin - 1e-12);
    }
  }
  SUBCASE("translation cancels the interaction terms") {
    const double c = 0.75;
    const auto nu0 = gaussian_pair_grid(0.0, 0.7, -7.0, 8.0);
    const auto nu1 = gaussian_pair_grid(c, 0.7, -7.0, 8.0);
    const auto rep = hwbi_check(nu0, nu1, quadratic_potential<1>(1.1),
                                quadratic_interaction<1>(0.8));
    CHECK(std::abs(rep.w2 * rep.w2 - c * c) < 1e-6);
    CHECK(std::abs(rep.bary_shift_sq - c * c) < 1e-6);
    // -(kv+kw)/2 W2^2 + kw/2 |db|^2 reduces to the HWI term -kv/2 W2^2
    CHECK(std::abs((rep.term_w2 + rep.term_bary) - (-0.5 * 1.1 * rep.w2 * rep.w2)) < 1e-6);
  }
}

TEST_CASE("interaction convexity constant") {
  const auto nu0 = gaussian_pair_grid(-0.6, 0.8, -10.0, 10.0);
  const auto nu1 = gaussian_pair_grid(0.9, 1.1, -10.0, 10.0);
  const auto w = quadratic_interaction<1>(0.9);

  SUBCASE("quadratic interaction makes the bound tight") {
    const double gap = interaction_convexity_gap(nu0, nu1, w, 33);
    CHECK(gap >= -1e-3);
    CHECK(gap <= 1e-3);
  }
  SUBCASE("theta identity, two quadratures") {
    const auto id = theta_identity(nu0, nu1);
    CHECK(std::abs(id.double_integral - id.moment_form) < 1e-6);
    CHECK(id.moment_form >= -1e-12);  // W2^2 - |db|^2 is a variance
  }
  SUBCASE("literal double sum agrees with the factored quadrature") {
    // O(M^2) check on a coarse grid
    const auto a = gaussian_density_on_grid({-0.3, 0.5}, -6.0, 6.0, 256);
    const auto b = gaussian_density_on_grid({0.5, 1.2}, -6.0, 6.0, 256);
    const auto map = brenier_map_1d(a, b);
    double lhs = 0.0;
    for (Eigen::Index i = 0; i < a.cells(); ++i) {
      const double ti = a.midpoint(i) - map(a.midpoint(i));
      for (Eigen::Index j = 0; j < a.cells(); ++j) {
        const double tj = a.midpoint(j) - map(a.midpoint(j));
        lhs += 0.5 * (ti - tj) * (ti - tj) * a.cell(i) * a.cell(j);
      }
    }
    lhs *= a.dx() * a.dx();
    const auto id = theta_identity(a, b);
    CHECK(lhs == doctest::Approx(id.double_integral).epsilon(1e-3));
  }
}
