#pragma once

#include <cstdint>
#include <functional>

#include "mkvflow/common.hpp"

namespace mkv {

// Equally weighted particle cloud approximating Law(X_t). Rows are particles.
template <int Dim = 1>
struct ParticleEnsemble {
  Eigen::Matrix<double, Eigen::Dynamic, Dim> positions;
  double time_stamp = 0.0;

  Eigen::Index size() const { return positions.rows(); }

  Point<Dim> point(Eigen::Index i) const {
    if constexpr (Dim == 1) {
      return positions(i, 0);
    } else {
      return positions.row(i).transpose();
    }
  }
};

using Ensemble = ParticleEnsemble<1>;

// 1-D cell-averaged probability density on [lo, hi]. Mass is kept at 1 and
// cells are floored (relative to the peak) before any logarithm is taken.
struct GridDensity {
  double lo = 0.0;
  double hi = 1.0;
  Eigen::ArrayXd cell;
  double floor_eps = 0.0;

  Eigen::Index cells() const { return cell.size(); }
  double dx() const { return (hi - lo) / static_cast<double>(cell.size()); }
  double midpoint(Eigen::Index i) const { return lo + (static_cast<double>(i) + 0.5) * dx(); }
  double left_edge(Eigen::Index i) const { return lo + static_cast<double>(i) * dx(); }
  bool contains(double x) const { return x >= lo && x <= hi; }
  double mass() const { return cell.sum() * dx(); }
};

struct GaussianState {
  double mean = 0.0;
  double variance = 1.0;
};

inline constexpr double kFloorScale = 1e-14;  // floor = 1e-14 * max cell

// Renormalize to unit mass, then floor at kFloorScale * max.
void finalize(GridDensity& g);

// Cell values from a pointwise density function (midpoint sampling),
// then finalize.
GridDensity grid_from_function(const std::function<double(double)>& f, double lo, double hi,
                               Eigen::Index m);

template <int Dim = 1>
ParticleEnsemble<Dim> sample_gaussian(const GaussianState& g, Eigen::Index n, std::uint64_t seed);

// Gaussian-kernel density estimate, cell-averaged exactly via erf. Throws
// CoverageError when more than 1% of the particles fall outside [lo, hi].
GridDensity density_from_ensemble(const Ensemble& e, double lo, double hi, Eigen::Index m,
                                  double bandwidth);

double silverman_bandwidth(const Ensemble& e);

// Exact cell averages of the normal density. The domain must cover at least
// +-4 standard deviations around the mean.
GridDensity gaussian_density_on_grid(const GaussianState& g, double lo, double hi,
                                     Eigen::Index m);

// Default grid window [mean - 8 sigma, mean + 8 sigma].
GridDensity gaussian_density_on_grid(const GaussianState& g, Eigen::Index m = 2048);

// E|X|^2 and the barycenter, exact sums over particles / exact piecewise
// polynomial integrals over cells.
template <int Dim>
double second_moment(const ParticleEnsemble<Dim>& e);
double second_moment(const GridDensity& g);
template <int Dim>
Point<Dim> barycenter(const ParticleEnsemble<Dim>& e);
double barycenter(const GridDensity& g);
double variance(const GridDensity& g);

void validate_ensemble(const Ensemble& e);

}  // namespace mkv
