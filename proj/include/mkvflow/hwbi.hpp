#pragma once

#include "mkvflow/measures.hpp"
#include "mkvflow/potentials.hpp"
#include "mkvflow/transport.hpp"

namespace mkv {

// d/dt|_{t=0+} H(nu_t | mu_t) along the displacement interpolation:
//   int <grad log r0_up(x, nu0), grad phi(x) - x> rho0(x) dx
// with r0_up = rho0 / exp(-V - W*nu0).
double entropy_derivative_at_zero(const GridDensity& nu0, const GridDensity& nu1,
                                  const PotentialSpec<1>& V, const InteractionSpec<1>& W);

// Energy split along the interpolation: f = U(rho_t), g = V(rho_t),
// h = W(rho_t) on a uniform t-grid, with central second differences.
struct ConvexityProfile {
  Eigen::ArrayXd t;
  Eigen::ArrayXd f, g, h;
  Eigen::ArrayXd f_dd, g_dd, h_dd;  // interior second differences / dt^2

  Eigen::ArrayXd total() const { return f + g + h; }
};

ConvexityProfile convexity_profile(const GridDensity& nu0, const GridDensity& nu1,
                                   const PotentialSpec<1>& V, const InteractionSpec<1>& W,
                                   int k = 33);

struct HwbiReport {
  double lhs = 0.0;              // H(nu0|mu0) - H(nu1|mu1)
  double term_derivative = 0.0;  // -int <grad log r0_up, grad phi - x> rho0
  double term_w2 = 0.0;          // -(kv+kw)/2 W2^2
  double term_bary = 0.0;        // +kw/2 |b0-b1|^2
  double margin = 0.0;           // rhs - lhs >= 0 is the inequality
  double cs_rhs = 0.0;           // sqrt(I(nu0|mu0_up)) W2
  double cs_margin = 0.0;
  double w2 = 0.0;
  double bary_shift_sq = 0.0;
  double h0 = 0.0, h1 = 0.0;
  double fisher0 = 0.0;
};

// Certifies the sharpened HWBI inequality for a pair of grid densities,
// using the convexity moduli stored on the potential specs. Throws Error
// when H(nu1|mu1) is not finite.
HwbiReport hwbi_check(const GridDensity& nu0, const GridDensity& nu1, const PotentialSpec<1>& V,
                      const InteractionSpec<1>& W);

// min over interior t of h''(t) - kw (W2^2 - |b0-b1|^2); the uniform
// convexity constant of the interaction energy is certified when this is
// >= -tol.
double interaction_convexity_gap(const GridDensity& nu0, const GridDensity& nu1,
                                 const InteractionSpec<1>& W, int k = 33);

// Both sides of the identity (1/2) iint |theta(x)-theta(y)|^2 dnu0 dnu0
// = W2^2 - |b0-b1|^2 with theta = Id - grad phi, evaluated by independent
// quadratures.
struct ThetaIdentity {
  double double_integral = 0.0;
  double moment_form = 0.0;
};
ThetaIdentity theta_identity(const GridDensity& nu0, const GridDensity& nu1);

}  // namespace mkv
