#pragma once

#include <vector>

#include "mkvflow/entropy_fisher.hpp"
#include "mkvflow/measures.hpp"
#include "mkvflow/pde.hpp"

namespace mkv {

// Piecewise-linear quantile function: segment k maps the mass interval
// (u[k], u[k+1]) linearly onto positions (x_lo[k], x_hi[k]). Cell-averaged
// densities and empirical measures are exactly of this form, so 1-D
// transport quantities reduce to exact segment integrals.
struct QuantileFunction {
  Eigen::ArrayXd u;     // K+1 breakpoints, 0 = u(0) <= ... <= u(K) = 1
  Eigen::ArrayXd x_lo;  // K segment endpoints
  Eigen::ArrayXd x_hi;

  double operator()(double v) const;
  Eigen::Index segments() const { return x_lo.size(); }
};

QuantileFunction quantile_function(const GridDensity& g);
QuantileFunction quantile_function(const Ensemble& e);  // sorted atoms

// W2 by exact integration of |Q0(u) - Q1(u)|^2 over merged segment
// breakpoints. Equal-size ensembles reduce to the sorted matching.
double wasserstein2(const QuantileFunction& q0, const QuantileFunction& q1);
double wasserstein2(const GridDensity& a, const GridDensity& b);
double wasserstein2(const Ensemble& a, const Ensemble& b);
double wasserstein2(const GridDensity& a, const Ensemble& b);

// Midpoint-rule variant on np quantile nodes; kept as an independent route
// for cross-checks.
double wasserstein2_nodes(const QuantileFunction& q0, const QuantileFunction& q1, int np = 4096);

// Exact optimal assignment by permutation enumeration; n <= 8.
double wasserstein2_bruteforce(const Ensemble& a, const Ensemble& b);

double wasserstein1(const QuantileFunction& q0, const QuantileFunction& q1);

// Monotone rearrangement F1^{-1} o F0 sampled on quantile nodes; evaluation
// by monotone linear interpolation.
struct MonotoneMap {
  Eigen::ArrayXd x;  // nondecreasing nodes
  Eigen::ArrayXd y;

  double operator()(double v) const;
};

MonotoneMap brenier_map_1d(const GridDensity& nu0, const GridDensity& nu1, int nodes = 4096);

// McCann interpolation nu_t = ((1-t) Id + t grad phi)_# nu0, realized by
// linear interpolation of the quantile functions and exact re-binning onto a
// grid. m_out <= 0 doubles the finer endpoint resolution.
GridDensity displacement_interpolation(const GridDensity& nu0, const GridDensity& nu1, double t,
                                       Eigen::Index m_out = 0);

struct MetricDerivative {
  double t0 = 0.0;
  double velocity_norm = 0.0;  // ||grad log l_up + grad beta||_{L^2(p_t0)}
  double fd_ratio = 0.0;       // W2(P_{t0+h}, P_{t0}) / h
  double fd_ratio_half = 0.0;  // same at h/2 (Richardson check)
  double h = 0.0;
};

// Wasserstein metric derivative of the curve at t0: the L^2(p_t0) norm of
// the velocity field v = -(grad log p + grad V + grad beta + grad W*p),
// cross-checked by finite-difference W2 ratios on the stored snapshots.
MetricDerivative metric_derivative(const std::vector<PdeState>& curve, const PdeProblem& prob,
                                   double t0);

struct SlopeReport {
  double unperturbed = 0.0;     // -||L_up||
  double perturbed = 0.0;       // -<L_up, (L_up+B)/||L_up+B||>
  double perturbed_direct = 0.0;  // same via the dissipation-over-speed form
  double inner = 0.0;           // <L_up, B>
  double norm_l = 0.0;
  double norm_lb = 0.0;         // ||L_up + B||
  double cosine = 0.0;          // <L_up, L_up+B> / (||L_up|| ||L_up+B||)
  bool degenerate = false;      // ||L_up + B|| ~ 0: perturbed slope omitted
};

// Wasserstein metric slopes of the free energy at a PDE state, unperturbed
// and along the beta-perturbed curve. The perturbed numerator is evaluated
// both as <L_up, L_up+B> and as ||L_up||^2 + (direct-form beta correction);
// the two agree through the integration-by-parts identity.
SlopeReport metric_slopes(const PdeState& state, const PotentialSpec<1>& V,
                          const InteractionSpec<1>& W, const PerturbationSpec<1>& beta);

// Same algebra with a raw L^2(p) vector field standing in for grad beta;
// admits exact collinear fields for the equality case of the slope theorem.
SlopeReport metric_slopes_field(const PdeState& state, const PotentialSpec<1>& V,
                                const InteractionSpec<1>& W, const Eigen::ArrayXd& field);

}  // namespace mkv
