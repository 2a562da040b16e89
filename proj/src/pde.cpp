#include "mkvflow/pde.hpp"

#include <cmath>

namespace mkv {
namespace {

// Bernoulli function B(z) = z / (e^z - 1), the exponential-fitting weight.
double bernoulli(double z) {
  if (std::abs(z) < 1e-5) return 1.0 - 0.5 * z + z * z / 12.0;
  return z / std::expm1(z);
}

// Potential Phi = V + beta + W*p at the cell midpoints. Face drifts are the
// potential differences Phi_{i+1} - Phi_i, which makes exp(-Phi) a discrete
// steady state of the flux below.
Eigen::ArrayXd total_potential(const PdeProblem& prob, const GridDensity& g) {
  const Eigen::Index m = g.cells();
  Eigen::ArrayXd phi(m);
  const bool quad_w = prob.interaction.is_quadratic;
  double m1 = 0.0, m2 = 0.0;
  if (quad_w && !prob.interaction.is_zero) {
    m1 = barycenter(g);
    m2 = second_moment(g);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    const double x = g.midpoint(i);
    double v = prob.confinement.value(x);
    if (!prob.beta.is_zero) v += prob.beta.value(x);
    if (!prob.interaction.is_zero) {
      v += quad_w ? 0.5 * prob.interaction.quad_coeff * (x * x - 2.0 * m1 * x + m2)
                  : convolve_value(prob.interaction, g, x);
    }
    phi(i) = v;
  }
  return phi;
}

double max_face_drift(const Eigen::ArrayXd& phi, double dx) {
  double m = 0.0;
  for (Eigen::Index i = 0; i + 1 < phi.size(); ++i) {
    m = std::max(m, std::abs(phi(i + 1) - phi(i)) / dx);
  }
  return m;
}

}  // namespace

double stable_dt(const PdeProblem& prob, const PdeState& state) {
  const double dx = state.grid.dx();
  const auto phi = total_potential(prob, state.grid);
  return 0.4 * dx * dx / (2.0 + dx * max_face_drift(phi, dx));
}

PdeState step(const PdeProblem& prob, const PdeState& state, double dt) {
  const GridDensity& g = state.grid;
  const Eigen::Index m = g.cells();
  const double dx = g.dx();
  if (!(dt > 0.0)) throw ConfigError("pde step: dt must be positive");

  const auto phi = total_potential(prob, g);
  const double bound = 0.4 * dx * dx / (2.0 + dx * max_face_drift(phi, dx));
  if (dt > bound * (1.0 + 1e-12)) {
    throw StabilityError("pde step: dt = " + std::to_string(dt) +
                         " violates the stability bound; admissible dt <= " +
                         std::to_string(bound));
  }

  // Interior face fluxes G_{i+1/2} = (B(-z) p_{i+1} - B(z) p_i)/dx with
  // z = Phi_{i+1} - Phi_i; no-flux boundaries make the update telescope, so
  // mass is conserved exactly.
  PdeState next;
  next.time = state.time + dt;
  next.grid = g;
  Eigen::ArrayXd& p = next.grid.cell;
  const double r = dt / (dx * dx);
  double flux_lo = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    double flux_hi = 0.0;
    if (i + 1 < m) {
      const double z = phi(i + 1) - phi(i);
      flux_hi = bernoulli(-z) * g.cell(i + 1) - bernoulli(z) * g.cell(i);
    }
    p(i) = g.cell(i) + r * (flux_hi - flux_lo);
    flux_lo = flux_hi;
  }
  next.grid.floor_eps = kFloorScale * p.maxCoeff();
  return next;
}

PdeState step_perturbed(const PdeProblem& prob, const PdeState& state, double dt) {
  return step(prob, state, dt);
}

double score(const GridDensity& grid, double x) {
  if (!grid.contains(x)) throw CoverageError("score: point outside grid domain");
  const Eigen::Index m = grid.cells();
  const double dx = grid.dx();
  const auto log_at = [&](Eigen::Index i) {
    return std::log(std::max(grid.cell(i), grid.floor_eps > 0 ? grid.floor_eps
                                                              : kFloorScale * grid.cell.maxCoeff()));
  };
  const auto score_at = [&](Eigen::Index i) {
    if (i == 0) return (log_at(1) - log_at(0)) / dx;
    if (i == m - 1) return (log_at(m - 1) - log_at(m - 2)) / dx;
    return (log_at(i + 1) - log_at(i - 1)) / (2.0 * dx);
  };
  const double pos = (x - grid.lo) / dx - 0.5;
  const auto j = static_cast<Eigen::Index>(std::floor(pos));
  if (j < 0) return score_at(0);
  if (j >= m - 1) return score_at(m - 1);
  const double w = pos - static_cast<double>(j);
  return (1.0 - w) * score_at(j) + w * score_at(j + 1);
}

double score(const PdeState& state, double x) { return score(state.grid, x); }

std::vector<PdeState> solve_curve(const PdeProblem& prob, const GridDensity& initial, double T,
                                  double dt, Eigen::Index snapshot_stride) {
  if (!(T >= 0.0)) throw ConfigError("solve_curve: T must be nonnegative");
  PdeState state{initial, 0.0};
  std::vector<PdeState> curve;
  if (T == 0.0) {
    curve.push_back(state);
    return curve;
  }
  if (dt <= 0.0) dt = 0.5 * stable_dt(prob, state);
  auto steps = static_cast<Eigen::Index>(std::ceil(T / dt - 1e-12));
  dt = T / static_cast<double>(steps);
  if (snapshot_stride <= 0) {
    snapshot_stride = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(1e-3 / dt)));
  }
  curve.reserve(static_cast<std::size_t>(steps / snapshot_stride) + 2);
  curve.push_back(state);
  for (Eigen::Index k = 0; k < steps; ++k) {
    state = step(prob, state, dt);
    state.time = static_cast<double>(k + 1) * dt;  // no accumulated rounding
    if ((k + 1) % snapshot_stride == 0 || k + 1 == steps) {
      curve.push_back(state);
    }
  }
  return curve;
}

}  // namespace mkv
