#include "mkvflow/measures.hpp"

#include <algorithm>
#include <cmath>

#include "mkvflow/rng.hpp"

namespace mkv {
namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

}  // namespace

void finalize(GridDensity& g) {
  if (g.cells() < 2 || !(g.hi > g.lo)) throw InvalidMeasureError("grid needs >= 2 cells");
  if (!g.cell.allFinite() || (g.cell < 0.0).any()) {
    throw InvalidMeasureError("grid cells must be finite and nonnegative");
  }
  const double mass = g.cell.sum() * g.dx();
  if (!(mass > 0.0)) throw InvalidMeasureError("grid carries no mass");
  g.cell /= mass;
  g.floor_eps = kFloorScale * g.cell.maxCoeff();
  g.cell = g.cell.max(g.floor_eps);
  g.cell /= g.cell.sum() * g.dx();
}

GridDensity grid_from_function(const std::function<double(double)>& f, double lo, double hi,
                               Eigen::Index m) {
  GridDensity g;
  g.lo = lo;
  g.hi = hi;
  g.cell.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) g.cell(i) = f(g.midpoint(i));
  finalize(g);
  return g;
}

template <int Dim>
ParticleEnsemble<Dim> sample_gaussian(const GaussianState& g, Eigen::Index n, std::uint64_t seed) {
  if (n < 2) throw InvalidMeasureError("ensemble needs at least 2 particles");
  if (!(g.variance > 0.0)) throw InvalidMeasureError("variance must be positive");
  ParticleEnsemble<Dim> e;
  e.positions.resize(n, Dim);
  const double sd = std::sqrt(g.variance);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int d = 0; d < Dim; ++d) {
      e.positions(i, d) = g.mean + sd * rng::normal(seed, static_cast<std::uint64_t>(i),
                                                    static_cast<std::uint64_t>(d),
                                                    rng::Purpose::init_sample);
    }
  }
  return e;
}

GridDensity density_from_ensemble(const Ensemble& e, double lo, double hi, Eigen::Index m,
                                  double bandwidth) {
  validate_ensemble(e);
  if (!(bandwidth > 0.0)) throw InvalidMeasureError("bandwidth must be positive");
  const Eigen::Index n = e.size();
  Eigen::Index outside = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = e.positions(i, 0);
    if (x < lo || x > hi) ++outside;
  }
  if (static_cast<double>(outside) > 0.01 * static_cast<double>(n)) {
    throw CoverageError("domain excludes more than 1% of the particles");
  }

  GridDensity g;
  g.lo = lo;
  g.hi = hi;
  g.cell = Eigen::ArrayXd::Zero(m);
  const double dx = g.dx();
  // Exact cell averages of the Gaussian KDE; each kernel only touches edges
  // within 8 bandwidths.
  const double window = 8.0 * bandwidth;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = e.positions(i, 0);
    const auto j_lo = static_cast<Eigen::Index>(std::floor((x - window - lo) / dx));
    const auto j_hi = static_cast<Eigen::Index>(std::ceil((x + window - lo) / dx));
    const Eigen::Index a = std::max<Eigen::Index>(0, j_lo);
    const Eigen::Index b = std::min<Eigen::Index>(m, j_hi);
    if (a >= b) continue;
    double prev = normal_cdf((g.left_edge(a) - x) / bandwidth);
    for (Eigen::Index j = a; j < b; ++j) {
      const double next = normal_cdf((g.left_edge(j + 1) - x) / bandwidth);
      g.cell(j) += next - prev;
      prev = next;
    }
  }
  g.cell /= static_cast<double>(n) * dx;
  finalize(g);
  return g;
}

double silverman_bandwidth(const Ensemble& e) {
  validate_ensemble(e);
  const Eigen::Index n = e.size();
  double mean = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) mean += e.positions(i, 0);
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = e.positions(i, 0) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
}

GridDensity gaussian_density_on_grid(const GaussianState& g, double lo, double hi,
                                     Eigen::Index m) {
  if (!(g.variance > 0.0)) throw InvalidMeasureError("variance must be positive");
  const double sd = std::sqrt(g.variance);
  if (lo > g.mean - 4.0 * sd || hi < g.mean + 4.0 * sd) {
    throw CoverageError("grid domain must cover at least 4 standard deviations");
  }
  GridDensity out;
  out.lo = lo;
  out.hi = hi;
  out.cell.resize(m);
  const double dx = out.dx();
  double prev = normal_cdf((lo - g.mean) / sd);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double next = normal_cdf((out.left_edge(i + 1) - g.mean) / sd);
    out.cell(i) = (next - prev) / dx;
    prev = next;
  }
  finalize(out);
  return out;
}

GridDensity gaussian_density_on_grid(const GaussianState& g, Eigen::Index m) {
  const double sd = std::sqrt(g.variance);
  return gaussian_density_on_grid(g, g.mean - 8.0 * sd, g.mean + 8.0 * sd, m);
}

template <int Dim>
double second_moment(const ParticleEnsemble<Dim>& e) {
  if (e.size() == 0) throw InvalidMeasureError("empty ensemble");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) acc += squared_norm(e.point(i));
  return acc / static_cast<double>(e.size());
}

double second_moment(const GridDensity& g) {
  // sum_i p_i int_cell x^2 dx, exact per cell
  double acc = 0.0;
  for (Eigen::Index i = 0; i < g.cells(); ++i) {
    const double l = g.left_edge(i);
    const double r = g.left_edge(i + 1);
    acc += g.cell(i) * (r * r * r - l * l * l) / 3.0;
  }
  return acc;
}

template <int Dim>
Point<Dim> barycenter(const ParticleEnsemble<Dim>& e) {
  if (e.size() == 0) throw InvalidMeasureError("empty ensemble");
  Point<Dim> acc = zero_point<Dim>();
  for (Eigen::Index i = 0; i < e.size(); ++i) acc += e.point(i);
  if constexpr (Dim == 1) {
    return acc / static_cast<double>(e.size());
  } else {
    return (acc / static_cast<double>(e.size())).eval();
  }
}

double barycenter(const GridDensity& g) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < g.cells(); ++i) {
    const double l = g.left_edge(i);
    const double r = g.left_edge(i + 1);
    acc += g.cell(i) * (r * r - l * l) / 2.0;
  }
  return acc;
}

double variance(const GridDensity& g) {
  const double m = barycenter(g);
  return second_moment(g) - m * m;
}

void validate_ensemble(const Ensemble& e) {
  if (e.size() < 2) throw InvalidMeasureError("ensemble needs at least 2 particles");
  if (!e.positions.allFinite()) throw InvalidMeasureError("ensemble has non-finite positions");
}

template ParticleEnsemble<1> sample_gaussian<1>(const GaussianState&, Eigen::Index, std::uint64_t);
template ParticleEnsemble<2> sample_gaussian<2>(const GaussianState&, Eigen::Index, std::uint64_t);
template double second_moment<1>(const ParticleEnsemble<1>&);
template double second_moment<2>(const ParticleEnsemble<2>&);
template Point<1> barycenter<1>(const ParticleEnsemble<1>&);
template Point<2> barycenter<2>(const ParticleEnsemble<2>&);

}  // namespace mkv
