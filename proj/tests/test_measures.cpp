#include <cmath>

#include "doctest.h"
#include "mkvflow/measures.hpp"

using namespace mkv;

TEST_CASE("sample_gaussian is deterministic and statistically sane") {
  const auto a = sample_gaussian({0.0, 0.1}, 100000, 99);
  const auto b = sample_gaussian({0.0, 0.1}, 100000, 99);
  CHECK((a.positions - b.positions).cwiseAbs().maxCoeff() == 0.0);

  double var = second_moment(a) - barycenter(a) * barycenter(a);
  CHECK(std::abs(var - 0.1) < 0.005);

  const auto c = sample_gaussian({5.0, 1.0}, 100000, 123);
  CHECK(std::abs(barycenter(c) - 5.0) < 0.01);

  CHECK_THROWS_AS(sample_gaussian({0.0, 1.0}, 1, 7), InvalidMeasureError);
}

TEST_CASE("sample_gaussian in two dimensions") {
  const auto e = sample_gaussian<2>({1.0, 0.5}, 50000, 17);
  const auto b = barycenter(e);
  CHECK(std::abs(b(0) - 1.0) < 0.02);
  CHECK(std::abs(b(1) - 1.0) < 0.02);
  CHECK(std::abs(second_moment(e) - (2.0 * (1.0 + 0.5))) < 0.05);
}

TEST_CASE("gaussian grid: mass, peak, variance") {
  GridDensity g = gaussian_density_on_grid({0.0, 1.0}, 4096);
  CHECK(std::abs(g.mass() - 1.0) < 1e-12);
  CHECK(g.cell.maxCoeff() == doctest::Approx(0.39894228040143268).epsilon(1e-4));
  CHECK(variance(g) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(barycenter(g) == doctest::Approx(0.0).epsilon(1e-10));

  GridDensity g2 = gaussian_density_on_grid({0.7, 0.25}, 2048);
  CHECK(barycenter(g2) == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(second_moment(g2) == doctest::Approx(0.7 * 0.7 + 0.25).epsilon(1e-4));

  CHECK_THROWS_AS(gaussian_density_on_grid({0.0, 1.0}, -3.0, 3.0, 128), CoverageError);
}

TEST_CASE("ensemble moments are exact index-ordered sums") {
  Ensemble e;
  e.positions.resize(3, 1);
  e.positions << 1.0, 2.0, 3.0;
  CHECK(barycenter(e) == 2.0);
  CHECK(second_moment(e) == doctest::Approx(14.0 / 3.0).epsilon(1e-15));

  Ensemble pm;
  pm.positions.resize(2, 1);
  pm.positions << -1.0, 1.0;
  CHECK(barycenter(pm) == 0.0);

  // brute-force loop, same order
  double acc = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) acc += e.positions(i, 0);
  CHECK(barycenter(e) == acc / 3.0);
}

TEST_CASE("kernel density estimate") {
  const auto e = sample_gaussian({0.0, 1.0}, 100000, 3);
  const double h = silverman_bandwidth(e);
  GridDensity kde = density_from_ensemble(e, -8.0, 8.0, 2048, h);
  CHECK(std::abs(kde.mass() - 1.0) < 1e-12);

  GridDensity exact = gaussian_density_on_grid({0.0, 1.0}, -8.0, 8.0, 2048);
  const double l1 = ((kde.cell - exact.cell).abs() * kde.dx()).sum();
  CHECK(l1 < 0.02);

  // barycenters agree within bandwidth + 3 MC standard errors
  CHECK(std::abs(barycenter(kde) - barycenter(e)) < h + 3.0 / std::sqrt(100000.0));

  SUBCASE("tight cluster peaks at the cluster") {
    Ensemble tight;
    tight.positions.resize(4, 1);
    tight.positions << -0.01, 0.0, 0.0, 0.01;
    GridDensity d = density_from_ensemble(tight, -4.0, 4.0, 512, 0.5);
    Eigen::Index imax;
    d.cell.maxCoeff(&imax);
    CHECK(std::abs(d.midpoint(imax)) < 0.1);
  }
  SUBCASE("poor coverage is an error") {
    CHECK_THROWS_AS(density_from_ensemble(e, 0.0, 1.0, 128, h), CoverageError);
  }
}

TEST_CASE("finalize floors cells before logs are ever taken") {
  GridDensity g;
  g.lo = 0.0;
  g.hi = 1.0;
  g.cell = Eigen::ArrayXd::Zero(8);
  g.cell(3) = 8.0;
  finalize(g);
  CHECK(std::abs(g.mass() - 1.0) < 1e-12);
  CHECK(g.floor_eps > 0.0);
  CHECK(g.cell.minCoeff() >= 0.999 * g.floor_eps);
}
