#include <cmath>

#include "doctest.h"
#include "mkvflow/oracles.hpp"
#include "mkvflow/transport.hpp"

using namespace mkv;

namespace {

Ensemble make_ensemble(const std::vector<double>& xs) {
  Ensemble e;
  e.positions.resize(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    e.positions(static_cast<Eigen::Index>(i), 0) = xs[i];
  }
  return e;
}

GridDensity shifted(const GridDensity& g, double c) {
  GridDensity out = g;
  out.lo += c;
  out.hi += c;
  return out;
}

}  // namespace

TEST_CASE("wasserstein2 basics") {
  const auto a = gaussian_density_on_grid({0.0, 1.0}, 2048);
  CHECK(wasserstein2(a, a) == 0.0);

  SUBCASE("gaussian closed form") {
    struct Case {
      double m0, s0, m1, s1;
    };
    for (const auto& c : {Case{0.0, 1.0, 1.5, 0.4}, Case{-0.7, 0.6, 0.3, 1.2},
                          Case{0.0, 0.316227766016838, 0.0, 1.0}}) {
      const double lo = std::min(c.m0, c.m1) - 8.0 * std::max(c.s0, c.s1);
      const double hi = std::max(c.m0, c.m1) + 8.0 * std::max(c.s0, c.s1);
      const auto nu0 = gaussian_density_on_grid({c.m0, c.s0 * c.s0}, lo, hi, 2048);
      const auto nu1 = gaussian_density_on_grid({c.m1, c.s1 * c.s1}, lo, hi, 2048);
      const double target = std::sqrt((c.m0 - c.m1) * (c.m0 - c.m1) +
                                      (c.s0 - c.s1) * (c.s0 - c.s1));
      CHECK(wasserstein2(nu0, nu1) == doctest::Approx(target).epsilon(1e-4));
    }
  }
  SUBCASE("equal-size empirical pairs match brute-force assignment") {
    for (int n : {2, 3, 5, 8}) {
      std::vector<double> xs, ys;
      for (int i = 0; i < n; ++i) {
        xs.push_back(std::sin(1.3 * i + 0.2) * 2.0);
        ys.push_back(std::cos(0.9 * i) * 1.5 + 0.3);
      }
      const auto ea = make_ensemble(xs);
      const auto eb = make_ensemble(ys);
      CHECK(std::abs(wasserstein2(ea, eb) - wasserstein2_bruteforce(ea, eb)) < 1e-10);
    }
  }
  SUBCASE("triangle inequality on random grid triples") {
    for (int c = 0; c < 6; ++c) {
      const auto f = [&](double m, double s) {
        return gaussian_density_on_grid({m, s * s}, -10.0, 10.0, 512);
      };
      const auto x = f(-1.0 + 0.3 * c, 0.5 + 0.1 * c);
      const auto y = f(0.4 * c - 0.8, 1.0);
      const auto z = f(0.2, 0.6 + 0.15 * c);
      CHECK(wasserstein2(x, z) <= wasserstein2(x, y) + wasserstein2(y, z) + 1e-6);
    }
  }
  SUBCASE("translation invariance") {
    const auto nu0 = gaussian_density_on_grid({0.0, 0.8}, -8.0, 8.0, 1024);
    const auto nu1 = gaussian_density_on_grid({0.4, 1.3}, -8.0, 8.0, 1024);
    const double base = wasserstein2(nu0, nu1);
    CHECK(wasserstein2(shifted(nu0, 0.5), shifted(nu1, 0.5)) ==
          doctest::Approx(base).epsilon(1e-13));
    CHECK(wasserstein2(shifted(nu0, 0.3), shifted(nu1, 0.3)) ==
          doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("node-sampled route agrees with the exact segment integral") {
    const auto nu0 = gaussian_density_on_grid({0.0, 1.0}, -9.0, 9.0, 1024);
    const auto nu1 = gaussian_density_on_grid({0.8, 0.5}, -9.0, 9.0, 1024);
    const double exact = wasserstein2(nu0, nu1);
    const double nodes = wasserstein2_nodes(quantile_function(nu0), quantile_function(nu1), 4096);
    CHECK(nodes == doctest::Approx(exact).epsilon(2e-3));
  }
  SUBCASE("grid vs ensemble") {
    const auto g = gaussian_density_on_grid({0.0, 1.0}, 1024);
    const auto e = sample_gaussian({0.0, 1.0}, 20000, 3);
    CHECK(wasserstein2(g, e) < 0.05);
  }
}

TEST_CASE("brenier map") {
  SUBCASE("identity for equal measures") {
    const auto g = gaussian_density_on_grid({0.3, 0.7}, 1024);
    const auto map = brenier_map_1d(g, g);
    CHECK((map.x - map.y).abs().maxCoeff() < 1e-8);
  }
  SUBCASE("gaussian pair maps affinely") {
    const auto nu0 = gaussian_density_on_grid({0.0, 1.0}, -9.0, 9.0, 2048);
    const auto nu1 = gaussian_density_on_grid({0.7, 0.25}, -9.0, 9.0, 2048);
    const auto map = brenier_map_1d(nu0, nu1);
    for (double x = -3.0; x <= 3.0; x += 0.37) {
      CHECK(map(x) == doctest::Approx(0.7 + 0.5 * x).epsilon(2e-3));
    }
    // nondecreasing nodes
    for (Eigen::Index i = 1; i < map.x.size(); ++i) {
      CHECK(map.x(i) >= map.x(i - 1));
      CHECK(map.y(i) >= map.y(i - 1));
    }
  }
  SUBCASE("pushforward cost reproduces W2") {
    const auto nu0 = gaussian_density_on_grid({0.0, 1.0}, -9.0, 9.0, 2048);
    const auto nu1 = gaussian_density_on_grid({0.5, 0.49}, -9.0, 9.0, 2048);
    const auto map = brenier_map_1d(nu0, nu1);
    double cost = 0.0;  // per-cell Simpson, exact for an affine map
    for (Eigen::Index i = 0; i < nu0.cells(); ++i) {
      const double xa = nu0.left_edge(i);
      const double xb = nu0.left_edge(i + 1);
      const double xm = nu0.midpoint(i);
      const double da = xa - map(xa);
      const double dm = xm - map(xm);
      const double db = xb - map(xb);
      cost += (da * da + 4.0 * dm * dm + db * db) / 6.0 * nu0.cell(i) * nu0.dx();
    }
    const double w2 = wasserstein2(nu0, nu1);
    CHECK(std::abs(cost - w2 * w2) < 1e-6);
  }
}

TEST_CASE("displacement interpolation") {
  const auto nu0 = gaussian_density_on_grid({-0.5, 0.64}, -9.0, 9.0, 1024);
  const auto nu1 = gaussian_density_on_grid({1.0, 1.44}, -9.0, 9.0, 1024);

  SUBCASE("endpoints are recovered") {
    for (double t : {0.0, 1.0}) {
      const auto nut = displacement_interpolation(nu0, nu1, t);
      const auto& target = (t == 0.0) ? nu0 : nu1;
      CHECK(wasserstein2(nut, target) < 1e-3);
      CHECK(std::abs(nut.mass() - 1.0) < 1e-12);
      // L1 distance against the analytic endpoint on the re-binned grid
      const double m = (t == 0.0) ? -0.5 : 1.0;
      const double sd = (t == 0.0) ? 0.8 : 1.2;
      double l1 = 0.0;
      for (Eigen::Index i = 0; i < nut.cells(); ++i) {
        const double z = (nut.midpoint(i) - m) / sd;
        const double exact = std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
        l1 += std::abs(nut.cell(i) - exact) * nut.dx();
      }
      CHECK(l1 < 0.02);
    }
  }
  SUBCASE("gaussian interpolants keep gaussian moments") {
    for (double t : {0.25, 0.5, 0.75}) {
      const auto nut = displacement_interpolation(nu0, nu1, t);
      const double m = (1.0 - t) * (-0.5) + t * 1.0;
      const double s = (1.0 - t) * 0.8 + t * 1.2;
      CHECK(barycenter(nut) == doctest::Approx(m).epsilon(1e-4));
      CHECK(variance(nut) == doctest::Approx(s * s).epsilon(1e-3));
    }
  }
  SUBCASE("barycenter interpolates linearly") {
    for (double t : {0.1, 0.4, 0.9}) {
      const auto nut = displacement_interpolation(nu0, nu1, t);
      CHECK(std::abs(barycenter(nut) -
                     ((1.0 - t) * barycenter(nu0) + t * barycenter(nu1))) < 1e-4);
    }
  }
}

TEST_CASE("wasserstein1 of a translation is the shift") {
  const auto nu0 = gaussian_density_on_grid({0.0, 1.0}, -9.0, 9.0, 1024);
  const auto nu1 = gaussian_density_on_grid({0.75, 1.0}, -9.0, 9.75, 1024);
  CHECK(wasserstein1(quantile_function(nu0), quantile_function(nu1)) ==
        doctest::Approx(0.75).epsilon(1e-3));
  CHECK(wasserstein1(quantile_function(nu0), quantile_function(nu0)) == 0.0);
}

TEST_CASE("metric derivative") {
  SUBCASE("stationary curve has zero speed") {
    const auto v = quadratic_potential<1>(1.0);
    PdeProblem prob{v, zero_interaction<1>(), zero_perturbation()};
    const auto p0 = grid_from_function([&](double x) { return std::exp(-v.value(x)); }, -8.0, 8.0,
                                       1024);
    const auto curve = solve_curve(prob, p0, 0.02, 0.0, 0);
    const auto md = metric_derivative(curve, prob, 0.0);
    CHECK(md.velocity_norm < 1e-3);
    CHECK(md.fd_ratio < 1e-3);
  }
  SUBCASE("OU curve at t0 = 0 has the closed-form speed") {
    const auto v = quadratic_potential<1>(1.0);
    PdeProblem prob{v, zero_interaction<1>(), zero_perturbation()};
    const auto p0 = gaussian_density_on_grid({0.0, 0.1}, -8.0, 8.0, 2048);
    const auto curve = solve_curve(prob, p0, 0.01, 0.0, 0);
    const auto md = metric_derivative(curve, prob, 0.0);
    CHECK(md.velocity_norm == doctest::Approx(2.8460498941515414).epsilon(0.01));
    CHECK(std::abs(md.fd_ratio - md.velocity_norm) <= 0.02 * md.velocity_norm);
  }
}

TEST_CASE("metric slopes") {
  const auto v = quadratic_potential<1>(1.0);
  const auto w = quadratic_interaction<1>(0.2);
  PdeProblem prob{v, w, zero_perturbation()};
  const auto p0 = gaussian_density_on_grid({0.0, 0.1}, -9.0, 9.0, 2048);
  const auto curve = solve_curve(prob, p0, 0.05, 0.0, 0);
  const PdeState& state = curve.back();

  SUBCASE("beta = 0 gives the unperturbed slope twice") {
    const auto rep = metric_slopes(state, v, w, zero_perturbation());
    CHECK(std::abs(rep.unperturbed - rep.perturbed) < 1e-12);
    CHECK(rep.unperturbed <= 0.0);
  }
  SUBCASE("steepest descent against random bumps") {
    for (int c = 0; c < 10; ++c) {
      const auto beta = bump_perturbation(0.05 + 0.02 * c, -1.0 + 0.2 * c, 0.8);
      const auto rep = metric_slopes(state, v, w, beta);
      REQUIRE_FALSE(rep.degenerate);
      CHECK(rep.unperturbed <= rep.perturbed + 1e-8);
      CHECK(std::abs(rep.cosine) <= 1.0 + 1e-12);
      CHECK(std::abs(rep.perturbed - rep.perturbed_direct) < 1e-6);
    }
  }
  SUBCASE("cancelling field is flagged degenerate") {
    Eigen::ArrayXd field(state.grid.cells());
    for (Eigen::Index i = 0; i < state.grid.cells(); ++i) {
      const double x = state.grid.midpoint(i);
      field(i) = -(score(state.grid, x) + v.gradient(x) +
                   convolve_gradient(w, state.grid, x));
    }
    const auto rep = metric_slopes_field(state, v, w, field);
    CHECK(rep.degenerate);
  }
  SUBCASE("collinear field attains equality") {
    Eigen::ArrayXd field(state.grid.cells());
    for (Eigen::Index i = 0; i < state.grid.cells(); ++i) {
      const double x = state.grid.midpoint(i);
      field(i) = 0.45 * (score(state.grid, x) + v.gradient(x) +
                         convolve_gradient(w, state.grid, x));
    }
    const auto rep = metric_slopes_field(state, v, w, field);
    CHECK(rep.cosine == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(rep.perturbed - rep.unperturbed) < 1e-10);
  }
}
