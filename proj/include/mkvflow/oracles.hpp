#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace mkv {

// Closed forms for the two worked examples (quadratic confinement / quadratic
// interaction, centered Gaussian start). Every acceptance tolerance is
// anchored against these; expected_dissipation in particular carries the
// elementary antiderivative, with integrate_adaptive as the independent
// regeneration route.

// sigma_t^2 = 1 + e^{-2t} (sigma_0^2 - 1)
double ou_variance(double t, double sigma0_sq);

// One step of the exact variance recursion s^2 <- e^{-2 dt} s^2 + (1 - e^{-2 dt}).
double ou_variance_step(double sigma_sq, double dt);

// (1 - 1/sigma^2)^2 x^2  (nonnegative)
double ou_integrand(double x, double sigma_sq);

// (1/sigma^4 + 1/2 - 1/sigma^2) x^2 + sigma^2/2 - 1  (signed)
double nl_integrand(double x, double sigma_sq);

// x^2 threshold below which nl_integrand is negative; +inf when the integrand
// is nonnegative everywhere.
double nl_sign_threshold(double sigma_sq);

// E[F_s] = int_{T-s}^{T} (sigma_t - 1/sigma_t)^2 dt, elementary antiderivative.
double expected_dissipation(double s, double sigma0_sq, double T);

// Adaptive Simpson quadrature; the regeneration oracle for the closed forms.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol = 1e-12);

struct OraclePath {
  Eigen::ArrayXd times;
  Eigen::ArrayXd values;
  std::string provenance;
};

OraclePath ou_variance_path(const Eigen::ArrayXd& times, double sigma0_sq);
OraclePath expected_dissipation_path(const Eigen::ArrayXd& s, double sigma0_sq, double T);

// Every HWBI ingredient in closed form for V = kv x^2/2, W = kw x^2/2 and a
// Gaussian pair N(m0, s0^2), N(m1, s1^2); s0, s1 are standard deviations.
struct GaussianHwbiSides {
  double h0 = 0, h1 = 0;              // H(nu_i | mu_i)
  double fisher0 = 0;                 // I(nu_0 | mu_0^up)
  double w2 = 0, w2_sq = 0;           // W_2, W_2^2
  double bary_shift_sq = 0;           // |b0 - b1|^2
  double lhs = 0;                     // h0 - h1
  double term_derivative = 0;         // -int <grad log r0^up, grad phi - x> rho0
  double term_w2 = 0;                 // -(kv+kw)/2 W2^2
  double term_bary = 0;               // +kw/2 |b0-b1|^2
  double margin = 0;                  // rhs - lhs
  double cs_rhs = 0;                  // sqrt(I) W2
  double cs_margin = 0;
};

GaussianHwbiSides gaussian_hwbi_sides(double m0, double s0, double m1, double s1, double kappa_v,
                                      double kappa_w);

}  // namespace mkv
