#include "mkvflow/hwbi.hpp"

#include <cmath>

#include "mkvflow/entropy_fisher.hpp"

namespace mkv {
namespace {

// Merged-breakpoint pieces of the displacement interpolation: the mass
// interval w is carried from (x0a, x0b) at t = 0 to (x1a, x1b) at t = 1.
struct Piece {
  double w, x0a, x0b, x1a, x1b;
};

std::vector<Piece> merged_pieces(const QuantileFunction& q0, const QuantileFunction& q1) {
  std::vector<Piece> pieces;
  pieces.reserve(static_cast<std::size_t>(q0.segments() + q1.segments()));
  Eigen::Index i = 0, j = 0;
  double u_prev = 0.0;
  const auto seg_val = [](const QuantileFunction& q, Eigen::Index k, double v) {
    const double ua = q.u(k), ub = q.u(k + 1);
    const double t = ub > ua ? (v - ua) / (ub - ua) : 0.0;
    return q.x_lo(k) + t * (q.x_hi(k) - q.x_lo(k));
  };
  while (i < q0.segments() && j < q1.segments()) {
    const double u_next = std::min(q0.u(i + 1), q1.u(j + 1));
    if (u_next > u_prev) {
      pieces.push_back({u_next - u_prev, seg_val(q0, i, u_prev), seg_val(q0, i, u_next),
                        seg_val(q1, j, u_prev), seg_val(q1, j, u_next)});
      u_prev = u_next;
    }
    if (q0.u(i + 1) <= u_next) ++i;
    if (q1.u(j + 1) <= u_next) ++j;
  }
  return pieces;
}

// U(rho_t) exactly: rho_t is piecewise uniform, so the entropy is
// sum w log(w / width_t).
double internal_energy_at(const std::vector<Piece>& pieces, double t) {
  double acc = 0.0;
  for (const auto& p : pieces) {
    const double width = (1.0 - t) * (p.x0b - p.x0a) + t * (p.x1b - p.x1a);
    if (p.w > 0.0 && width > 0.0) acc += p.w * std::log(p.w / width);
  }
  return acc;
}

struct QuantileNodes {
  Eigen::ArrayXd x, y;  // Q0 and Q1 at equal-mass nodes
};

QuantileNodes quantile_nodes(const GridDensity& nu0, const GridDensity& nu1, int n) {
  const auto q0 = quantile_function(nu0);
  const auto q1 = quantile_function(nu1);
  QuantileNodes nodes;
  nodes.x.resize(n);
  nodes.y.resize(n);
  for (int k = 0; k < n; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    nodes.x(k) = q0(u);
    nodes.y(k) = q1(u);
  }
  return nodes;
}

double interaction_energy_at(const QuantileNodes& nodes, const InteractionSpec<1>& W, double t,
                             int pair_nodes) {
  if (W.is_zero) return 0.0;
  const Eigen::ArrayXd tt = (1.0 - t) * nodes.x + t * nodes.y;
  if (W.is_quadratic) {
    const double mean = tt.mean();
    const double var = (tt - mean).square().mean();
    return 0.5 * W.quad_coeff * var;
  }
  // coarser equal-mass double sum for general kernels
  const auto n = static_cast<int>(tt.size());
  const int stride = std::max(1, n / pair_nodes);
  double acc = 0.0;
  long count = 0;
  for (int a = 0; a < n; a += stride) {
    for (int b = 0; b < n; b += stride) {
      acc += W.value(tt(a) - tt(b));
      ++count;
    }
  }
  return 0.5 * acc / static_cast<double>(count);
}

}  // namespace

double entropy_derivative_at_zero(const GridDensity& nu0, const GridDensity& nu1,
                                  const PotentialSpec<1>& V, const InteractionSpec<1>& W) {
  const auto map = brenier_map_1d(nu0, nu1, 4096);
  const double dx = nu0.dx();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < nu0.cells(); ++i) {
    const double x = nu0.midpoint(i);
    double l = score(nu0, x) + V.gradient(x);
    if (!W.is_zero) l += convolve_gradient(W, nu0, x);
    acc += l * (map(x) - x) * nu0.cell(i) * dx;
  }
  return acc;
}

ConvexityProfile convexity_profile(const GridDensity& nu0, const GridDensity& nu1,
                                   const PotentialSpec<1>& V, const InteractionSpec<1>& W,
                                   int k) {
  if (k < 8) throw Error("convexity_profile: need at least 8 sample points");
  const auto pieces = merged_pieces(quantile_function(nu0), quantile_function(nu1));
  const auto nodes = quantile_nodes(nu0, nu1, 4096);

  ConvexityProfile prof;
  prof.t.resize(k);
  prof.f.resize(k);
  prof.g.resize(k);
  prof.h.resize(k);
  for (int j = 0; j < k; ++j) {
    const double t = static_cast<double>(j) / static_cast<double>(k - 1);
    prof.t(j) = t;
    prof.f(j) = internal_energy_at(pieces, t);
    const Eigen::ArrayXd tt = (1.0 - t) * nodes.x + t * nodes.y;
    double gacc = 0.0;
    for (Eigen::Index a = 0; a < tt.size(); ++a) gacc += V.value(tt(a));
    prof.g(j) = gacc / static_cast<double>(tt.size());
    prof.h(j) = interaction_energy_at(nodes, W, t, 512);
  }
  const double dt = prof.t(1) - prof.t(0);
  prof.f_dd.resize(k - 2);
  prof.g_dd.resize(k - 2);
  prof.h_dd.resize(k - 2);
  for (int j = 1; j + 1 < k; ++j) {
    prof.f_dd(j - 1) = (prof.f(j + 1) - 2.0 * prof.f(j) + prof.f(j - 1)) / (dt * dt);
    prof.g_dd(j - 1) = (prof.g(j + 1) - 2.0 * prof.g(j) + prof.g(j - 1)) / (dt * dt);
    prof.h_dd(j - 1) = (prof.h(j + 1) - 2.0 * prof.h(j) + prof.h(j - 1)) / (dt * dt);
  }
  return prof;
}

HwbiReport hwbi_check(const GridDensity& nu0, const GridDensity& nu1, const PotentialSpec<1>& V,
                      const InteractionSpec<1>& W) {
  HwbiReport rep;
  rep.h0 = relative_entropy(nu0, V, W, EntropyReference::Q);
  rep.h1 = relative_entropy(nu1, V, W, EntropyReference::Q);
  if (!std::isfinite(rep.h1)) throw Error("hwbi_check: H(nu1 | mu1) is not finite");
  rep.lhs = rep.h0 - rep.h1;
  rep.fisher0 = relative_fisher(nu0, V, W);
  rep.w2 = wasserstein2(nu0, nu1);
  const double db = barycenter(nu0) - barycenter(nu1);
  rep.bary_shift_sq = db * db;
  rep.term_derivative = -entropy_derivative_at_zero(nu0, nu1, V, W);
  const double kv = V.convexity_modulus;
  const double kw = W.is_zero ? 0.0 : W.convexity_modulus;
  rep.term_w2 = -0.5 * (kv + kw) * rep.w2 * rep.w2;
  rep.term_bary = 0.5 * kw * rep.bary_shift_sq;
  rep.margin = (rep.term_derivative + rep.term_w2 + rep.term_bary) - rep.lhs;
  rep.cs_rhs = std::sqrt(std::max(rep.fisher0, 0.0)) * rep.w2;
  rep.cs_margin = (rep.cs_rhs + rep.term_w2 + rep.term_bary) - rep.lhs;
  return rep;
}

double interaction_convexity_gap(const GridDensity& nu0, const GridDensity& nu1,
                                 const InteractionSpec<1>& W, int k) {
  const auto prof = convexity_profile(nu0, nu1, zero_potential<1>(), W, k);
  const double w2 = wasserstein2(nu0, nu1);
  const double db = barycenter(nu0) - barycenter(nu1);
  const double kw = W.is_zero ? 0.0 : W.convexity_modulus;
  const double bound = kw * (w2 * w2 - db * db);
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < prof.h_dd.size(); ++j) {
    gap = std::min(gap, prof.h_dd(j) - bound);
  }
  return gap;
}

ThetaIdentity theta_identity(const GridDensity& nu0, const GridDensity& nu1) {
  const auto map = brenier_map_1d(nu0, nu1, 4096);
  const double dx = nu0.dx();
  // per-cell Simpson of theta and theta^2 with theta = Id - grad phi; exact
  // when the map is linear within a cell
  double mean_theta = 0.0, mean_theta_sq = 0.0;
  for (Eigen::Index i = 0; i < nu0.cells(); ++i) {
    const double xa = nu0.left_edge(i);
    const double xb = nu0.left_edge(i + 1);
    const double xm = nu0.midpoint(i);
    const double ta = xa - map(xa);
    const double tm = xm - map(xm);
    const double tb = xb - map(xb);
    const double w = nu0.cell(i) * dx;
    mean_theta += w * (ta + 4.0 * tm + tb) / 6.0;
    mean_theta_sq += w * (ta * ta + 4.0 * tm * tm + tb * tb) / 6.0;
  }
  ThetaIdentity out;
  // (1/2) iint |theta(x)-theta(y)|^2 = E theta^2 - (E theta)^2
  out.double_integral = mean_theta_sq - mean_theta * mean_theta;
  const double w2 = wasserstein2(nu0, nu1);
  const double db = barycenter(nu0) - barycenter(nu1);
  out.moment_form = w2 * w2 - db * db;
  return out;
}

}  // namespace mkv
