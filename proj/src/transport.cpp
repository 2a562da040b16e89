#include "mkvflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mkvflow/entropy_fisher.hpp"

namespace mkv {
namespace {

// Value of the quantile inside segment k at mass level v.
double segment_value(const QuantileFunction& q, Eigen::Index k, double v) {
  const double ua = q.u(k);
  const double ub = q.u(k + 1);
  const double t = ub > ua ? (v - ua) / (ub - ua) : 0.0;
  return q.x_lo(k) + t * (q.x_hi(k) - q.x_lo(k));
}

}  // namespace

double QuantileFunction::operator()(double v) const {
  v = std::clamp(v, 0.0, 1.0);
  const auto* begin = u.data();
  const auto* end = u.data() + u.size();
  auto k = static_cast<Eigen::Index>(std::upper_bound(begin, end, v) - begin) - 1;
  k = std::clamp<Eigen::Index>(k, 0, segments() - 1);
  return segment_value(*this, k, v);
}

QuantileFunction quantile_function(const GridDensity& g) {
  const Eigen::Index m = g.cells();
  QuantileFunction q;
  q.u.resize(m + 1);
  q.x_lo.resize(m);
  q.x_hi.resize(m);
  const double total = g.cell.sum();
  double acc = 0.0;
  q.u(0) = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    acc += g.cell(i);
    q.u(i + 1) = acc / total;
    q.x_lo(i) = g.left_edge(i);
    q.x_hi(i) = g.left_edge(i + 1);
  }
  q.u(m) = 1.0;
  return q;
}

QuantileFunction quantile_function(const Ensemble& e) {
  validate_ensemble(e);
  const Eigen::Index n = e.size();
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) xs[static_cast<std::size_t>(i)] = e.positions(i, 0);
  std::sort(xs.begin(), xs.end());
  QuantileFunction q;
  q.u.resize(n + 1);
  q.x_lo.resize(n);
  q.x_hi.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    q.u(i) = static_cast<double>(i) / static_cast<double>(n);
    q.x_lo(i) = xs[static_cast<std::size_t>(i)];
    q.x_hi(i) = xs[static_cast<std::size_t>(i)];
  }
  q.u(n) = 1.0;
  return q;
}

// Merged-breakpoint walk. Both quantiles are linear on each merged
// u-interval, so the squared difference is quadratic and Simpson is exact.
double wasserstein2(const QuantileFunction& q0, const QuantileFunction& q1) {
  Eigen::Index i = 0, j = 0;
  double u_prev = 0.0;
  double acc = 0.0;
  while (i < q0.segments() && j < q1.segments()) {
    const double u_next = std::min(q0.u(i + 1), q1.u(j + 1));
    if (u_next > u_prev) {
      const double um = 0.5 * (u_prev + u_next);
      const double da = segment_value(q0, i, u_prev) - segment_value(q1, j, u_prev);
      const double dm = segment_value(q0, i, um) - segment_value(q1, j, um);
      const double db = segment_value(q0, i, u_next) - segment_value(q1, j, u_next);
      acc += (u_next - u_prev) / 6.0 * (da * da + 4.0 * dm * dm + db * db);
      u_prev = u_next;
    }
    if (q0.u(i + 1) <= u_next) ++i;
    if (q1.u(j + 1) <= u_next) ++j;
  }
  return std::sqrt(std::max(acc, 0.0));
}

double wasserstein2(const GridDensity& a, const GridDensity& b) {
  return wasserstein2(quantile_function(a), quantile_function(b));
}

double wasserstein2(const Ensemble& a, const Ensemble& b) {
  if (a.size() == b.size()) {
    // equal-size empirical measures: sorted matching is the exact optimum
    validate_ensemble(a);
    validate_ensemble(b);
    std::vector<double> xs(static_cast<std::size_t>(a.size()));
    std::vector<double> ys(static_cast<std::size_t>(b.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) xs[static_cast<std::size_t>(i)] = a.positions(i, 0);
    for (Eigen::Index i = 0; i < b.size(); ++i) ys[static_cast<std::size_t>(i)] = b.positions(i, 0);
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double d = xs[i] - ys[i];
      acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(xs.size()));
  }
  return wasserstein2(quantile_function(a), quantile_function(b));
}

double wasserstein2(const GridDensity& a, const Ensemble& b) {
  return wasserstein2(quantile_function(a), quantile_function(b));
}

double wasserstein2_nodes(const QuantileFunction& q0, const QuantileFunction& q1, int np) {
  double acc = 0.0;
  for (int k = 0; k < np; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(np);
    const double d = q0(u) - q1(u);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(np));
}

double wasserstein2_bruteforce(const Ensemble& a, const Ensemble& b) {
  if (a.size() != b.size() || a.size() > 8) {
    throw Error("wasserstein2_bruteforce: needs equal sizes <= 8");
  }
  const auto n = static_cast<std::size_t>(a.size());
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = a.positions(static_cast<Eigen::Index>(i), 0) -
                       b.positions(static_cast<Eigen::Index>(perm[i]), 0);
      cost += d * d;
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(n));
}

double wasserstein1(const QuantileFunction& q0, const QuantileFunction& q1) {
  Eigen::Index i = 0, j = 0;
  double u_prev = 0.0;
  double acc = 0.0;
  while (i < q0.segments() && j < q1.segments()) {
    const double u_next = std::min(q0.u(i + 1), q1.u(j + 1));
    if (u_next > u_prev) {
      double da = segment_value(q0, i, u_prev) - segment_value(q1, j, u_prev);
      double db = segment_value(q0, i, u_next) - segment_value(q1, j, u_next);
      const double du = u_next - u_prev;
      if (da * db >= 0.0) {
        acc += 0.5 * du * (std::abs(da) + std::abs(db));
      } else {
        const double root = da / (da - db);  // |difference| is piecewise linear
        acc += 0.5 * du * (root * std::abs(da) + (1.0 - root) * std::abs(db));
      }
      u_prev = u_next;
    }
    if (q0.u(i + 1) <= u_next) ++i;
    if (q1.u(j + 1) <= u_next) ++j;
  }
  return acc;
}

double MonotoneMap::operator()(double v) const {
  const Eigen::Index n = x.size();
  if (v <= x(0)) return y(0) + (v - x(0));
  if (v >= x(n - 1)) return y(n - 1) + (v - x(n - 1));
  const auto* begin = x.data();
  auto k = static_cast<Eigen::Index>(std::upper_bound(begin, begin + n, v) - begin) - 1;
  k = std::clamp<Eigen::Index>(k, 0, n - 2);
  const double span = x(k + 1) - x(k);
  if (span <= 0.0) return 0.5 * (y(k) + y(k + 1));
  const double t = (v - x(k)) / span;
  return y(k) + t * (y(k + 1) - y(k));
}

MonotoneMap brenier_map_1d(const GridDensity& nu0, const GridDensity& nu1, int nodes) {
  const auto q0 = quantile_function(nu0);
  const auto q1 = quantile_function(nu1);
  // The rearrangement between piecewise-uniform densities is piecewise
  // linear with kinks exactly at the merged mass breakpoints, so sampling
  // there makes the interpolated map exact. `nodes` only caps refinement of
  // segments coarser than 1/nodes in mass.
  std::vector<double> us;
  us.reserve(static_cast<std::size_t>(q0.u.size() + q1.u.size()));
  for (Eigen::Index i = 0; i < q0.u.size(); ++i) us.push_back(q0.u(i));
  for (Eigen::Index i = 0; i < q1.u.size(); ++i) us.push_back(q1.u(i));
  std::sort(us.begin(), us.end());
  us.erase(std::unique(us.begin(), us.end()), us.end());
  const double max_gap = 1.0 / std::max(nodes, 2);
  std::vector<double> grid;
  grid.reserve(us.size() * 2);
  for (std::size_t k = 0; k < us.size(); ++k) {
    if (k > 0 && us[k] - us[k - 1] > max_gap) {
      const int extra = static_cast<int>(std::floor((us[k] - us[k - 1]) / max_gap));
      for (int e = 1; e <= extra; ++e) {
        grid.push_back(us[k - 1] + (us[k] - us[k - 1]) * e / (extra + 1));
      }
    }
    grid.push_back(us[k]);
  }
  MonotoneMap map;
  map.x.resize(static_cast<Eigen::Index>(grid.size()));
  map.y.resize(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    map.x(static_cast<Eigen::Index>(k)) = q0(grid[k]);
    map.y(static_cast<Eigen::Index>(k)) = q1(grid[k]);
  }
  return map;
}

GridDensity displacement_interpolation(const GridDensity& nu0, const GridDensity& nu1, double t,
                                       Eigen::Index m_out) {
  if (t < 0.0 || t > 1.0) throw Error("displacement_interpolation: t must lie in [0,1]");
  const auto q0 = quantile_function(nu0);
  const auto q1 = quantile_function(nu1);
  if (m_out <= 0) m_out = 2 * std::max(nu0.cells(), nu1.cells());

  const double lo = (1.0 - t) * q0.x_lo(0) + t * q1.x_lo(0);
  const double hi = (1.0 - t) * q0.x_hi(q0.segments() - 1) + t * q1.x_hi(q1.segments() - 1);
  GridDensity out;
  out.lo = lo - 1e-12 * (1.0 + std::abs(lo));
  out.hi = hi + 1e-12 * (1.0 + std::abs(hi));
  out.cell = Eigen::ArrayXd::Zero(m_out);
  const double dx = out.dx();

  // The interpolated quantile is linear on merged segments, so nu_t is
  // piecewise uniform: deposit each piece onto the grid by interval overlap.
  Eigen::Index i = 0, j = 0;
  double u_prev = 0.0;
  while (i < q0.segments() && j < q1.segments()) {
    const double u_next = std::min(q0.u(i + 1), q1.u(j + 1));
    if (u_next > u_prev) {
      const double xa = (1.0 - t) * segment_value(q0, i, u_prev) +
                        t * segment_value(q1, j, u_prev);
      const double xb = (1.0 - t) * segment_value(q0, i, u_next) +
                        t * segment_value(q1, j, u_next);
      const double w = u_next - u_prev;
      if (xb - xa < 1e-300) {
        const auto c = std::clamp<Eigen::Index>(
            static_cast<Eigen::Index>((0.5 * (xa + xb) - out.lo) / dx), 0, m_out - 1);
        out.cell(c) += w / dx;
      } else {
        const double density = w / (xb - xa);
        auto ca = static_cast<Eigen::Index>(std::floor((xa - out.lo) / dx));
        auto cb = static_cast<Eigen::Index>(std::floor((xb - out.lo) / dx));
        ca = std::clamp<Eigen::Index>(ca, 0, m_out - 1);
        cb = std::clamp<Eigen::Index>(cb, 0, m_out - 1);
        for (Eigen::Index c = ca; c <= cb; ++c) {
          const double seg_lo = std::max(xa, out.lo + static_cast<double>(c) * dx);
          const double seg_hi = std::min(xb, out.lo + static_cast<double>(c + 1) * dx);
          if (seg_hi > seg_lo) out.cell(c) += density * (seg_hi - seg_lo) / dx;
        }
      }
      u_prev = u_next;
    }
    if (q0.u(i + 1) <= u_next) ++i;
    if (q1.u(j + 1) <= u_next) ++j;
  }
  finalize(out);
  return out;
}

MetricDerivative metric_derivative(const std::vector<PdeState>& curve, const PdeProblem& prob,
                                   double t0) {
  if (curve.size() < 3) throw Error("metric_derivative: need at least 3 snapshots");
  std::size_t k0 = 0;
  double gap = std::abs(curve[0].time - t0);
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const double g = std::abs(curve[k].time - t0);
    if (g < gap) {
      gap = g;
      k0 = k;
    }
  }
  if (k0 + 2 >= curve.size()) throw Error("metric_derivative: need two snapshots past t0");

  const GridDensity& g = curve[k0].grid;
  const double dx = g.dx();
  double norm_sq = 0.0;
  for (Eigen::Index i = 0; i < g.cells(); ++i) {
    const double x = g.midpoint(i);
    double v = score(g, x) + prob.confinement.gradient(x);
    if (!prob.beta.is_zero) v += prob.beta.gradient(x);
    if (!prob.interaction.is_zero) v += convolve_gradient(prob.interaction, g, x);
    norm_sq += v * v * g.cell(i) * dx;
  }

  MetricDerivative md;
  md.t0 = curve[k0].time;
  md.velocity_norm = std::sqrt(norm_sq);
  const double h1 = curve[k0 + 1].time - curve[k0].time;
  const double h2 = curve[k0 + 2].time - curve[k0].time;
  md.fd_ratio = wasserstein2(curve[k0 + 2].grid, curve[k0].grid) / h2;
  md.fd_ratio_half = wasserstein2(curve[k0 + 1].grid, curve[k0].grid) / h1;
  md.h = h2;
  return md;
}

namespace {

SlopeReport slopes_impl(const PdeState& state, const PotentialSpec<1>& V,
                        const InteractionSpec<1>& W, const Eigen::ArrayXd& bfield,
                        double direct_correction, bool have_direct) {
  const GridDensity& g = state.grid;
  const Eigen::Index m = g.cells();
  const double dx = g.dx();
  SlopeReport rep;
  double norm_l_sq = 0.0, inner = 0.0, norm_lb_sq = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double x = g.midpoint(i);
    double l = score(g, x) + V.gradient(x);
    if (!W.is_zero) l += convolve_gradient(W, g, x);
    const double w = g.cell(i) * dx;
    norm_l_sq += l * l * w;
    inner += l * bfield(i) * w;
    const double lb = l + bfield(i);
    norm_lb_sq += lb * lb * w;
  }
  rep.norm_l = std::sqrt(norm_l_sq);
  rep.norm_lb = std::sqrt(norm_lb_sq);
  rep.inner = inner;
  rep.unperturbed = -rep.norm_l;
  if (rep.norm_lb < 1e-10) {
    rep.degenerate = true;
    return rep;
  }
  rep.perturbed = -(norm_l_sq + inner) / rep.norm_lb;
  rep.perturbed_direct =
      have_direct ? -(norm_l_sq + direct_correction) / rep.norm_lb : rep.perturbed;
  rep.cosine = rep.norm_l > 0.0 ? (norm_l_sq + inner) / (rep.norm_l * rep.norm_lb) : 0.0;
  return rep;
}

}  // namespace

SlopeReport metric_slopes(const PdeState& state, const PotentialSpec<1>& V,
                          const InteractionSpec<1>& W, const PerturbationSpec<1>& beta) {
  const GridDensity& g = state.grid;
  Eigen::ArrayXd bfield(g.cells());
  for (Eigen::Index i = 0; i < g.cells(); ++i) bfield(i) = beta.gradient(g.midpoint(i));
  const double direct = beta_correction_direct(g, V, W, beta);
  return slopes_impl(state, V, W, bfield, direct, true);
}

SlopeReport metric_slopes_field(const PdeState& state, const PotentialSpec<1>& V,
                                const InteractionSpec<1>& W, const Eigen::ArrayXd& field) {
  if (field.size() != state.grid.cells()) {
    throw Error("metric_slopes_field: field must be sampled on the grid cells");
  }
  return slopes_impl(state, V, W, field, 0.0, false);
}

}  // namespace mkv
