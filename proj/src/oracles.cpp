#include "mkvflow/oracles.hpp"

#include <cmath>
#include <limits>

#include "mkvflow/common.hpp"

namespace mkv {

double ou_variance(double t, double sigma0_sq) {
  if (!(sigma0_sq > 0.0)) throw Error("ou_variance: sigma0^2 must be positive");
  if (t < 0.0) throw Error("ou_variance: t must be nonnegative");
  return 1.0 + std::exp(-2.0 * t) * (sigma0_sq - 1.0);
}

double ou_variance_step(double sigma_sq, double dt) {
  const double e = std::exp(-2.0 * dt);
  return e * sigma_sq + (1.0 - e);
}

double ou_integrand(double x, double sigma_sq) {
  const double a = 1.0 - 1.0 / sigma_sq;
  return a * a * x * x;
}

double nl_integrand(double x, double sigma_sq) {
  const double a = 1.0 / (sigma_sq * sigma_sq) + 0.5 - 1.0 / sigma_sq;
  return a * x * x + 0.5 * sigma_sq - 1.0;
}

double nl_sign_threshold(double sigma_sq) {
  const double a = 1.0 / (sigma_sq * sigma_sq) + 0.5 - 1.0 / sigma_sq;
  const double b = 1.0 - 0.5 * sigma_sq;
  if (b <= 0.0) return 0.0;  // integrand nonnegative everywhere
  return b / a;              // a > 0 always: (1/s^2 - 1/2)^2 + 1/4 > 0
}

double expected_dissipation(double s, double sigma0_sq, double T) {
  if (s < 0.0 || s > T) throw Error("expected_dissipation: need 0 <= s <= T");
  // int_{T-s}^{T} (sigma_t - 1/sigma_t)^2 dt with sigma_t^2 = 1 + c e^{-2t}:
  //   int sigma^2 dt   = t - (c/2) e^{-2t}
  //   int dt/sigma^2   = t + log(sigma_t)
  const double c = sigma0_sq - 1.0;
  const double a = T - s;
  const double var_a = ou_variance(a, sigma0_sq);
  const double var_b = ou_variance(T, sigma0_sq);
  return 0.5 * c * (std::exp(-2.0 * a) - std::exp(-2.0 * T)) + 0.5 * std::log(var_b / var_a);
}

namespace {

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  if (depth <= 0) return left + right;
  if (std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return adaptive(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 48);
}

OraclePath ou_variance_path(const Eigen::ArrayXd& times, double sigma0_sq) {
  OraclePath p;
  p.times = times;
  p.values.resize(times.size());
  for (Eigen::Index i = 0; i < times.size(); ++i) p.values(i) = ou_variance(times(i), sigma0_sq);
  p.provenance = "ou_variance closed form";
  return p;
}

OraclePath expected_dissipation_path(const Eigen::ArrayXd& s, double sigma0_sq, double T) {
  OraclePath p;
  p.times = s;
  p.values.resize(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    p.values(i) = expected_dissipation(s(i), sigma0_sq, T);
  }
  p.provenance = "expected_dissipation closed form";
  return p;
}

GaussianHwbiSides gaussian_hwbi_sides(double m0, double s0, double m1, double s1, double kappa_v,
                                      double kappa_w) {
  if (!(s0 > 0.0) || !(s1 > 0.0)) throw Error("gaussian_hwbi_sides: sd must be positive");
  GaussianHwbiSides r;
  const auto rel_ent = [&](double m, double s) {
    // H(N(m, s^2) | mu) for q = exp(-kv x^2/2 - (W*nu)/2), W = kw x^2/2
    return -0.5 * std::log(2.0 * M_PI * s * s) - 0.5 + 0.5 * kappa_v * (m * m + s * s) +
           0.5 * kappa_w * s * s;
  };
  r.h0 = rel_ent(m0, s0);
  r.h1 = rel_ent(m1, s1);
  r.lhs = r.h0 - r.h1;

  const double A = kappa_v + kappa_w - 1.0 / (s0 * s0);
  r.fisher0 = s0 * s0 * A * A + kappa_v * kappa_v * m0 * m0;

  const double dm = m0 - m1;
  const double ds = s0 - s1;
  r.w2_sq = dm * dm + ds * ds;
  r.w2 = std::sqrt(r.w2_sq);
  r.bary_shift_sq = dm * dm;

  // grad phi(x) = m1 + (s1/s0)(x - m0); derivative term via Gaussian moments
  const double lambda = s1 / s0 - 1.0;
  const double deriv = A * lambda * s0 * s0 + kappa_v * m0 * (m1 - m0);
  r.term_derivative = -deriv;
  r.term_w2 = -0.5 * (kappa_v + kappa_w) * r.w2_sq;
  r.term_bary = 0.5 * kappa_w * r.bary_shift_sq;
  r.margin = (r.term_derivative + r.term_w2 + r.term_bary) - r.lhs;
  r.cs_rhs = std::sqrt(std::max(r.fisher0, 0.0)) * r.w2;
  r.cs_margin = (r.cs_rhs + r.term_w2 + r.term_bary) - r.lhs;
  return r;
}

}  // namespace mkv
