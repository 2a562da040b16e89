#include "mkvflow/entropy_fisher.hpp"

#include <algorithm>
#include <cmath>

namespace mkv {
namespace {

double effective_floor(const GridDensity& g) {
  return g.floor_eps > 0.0 ? g.floor_eps : kFloorScale * g.cell.maxCoeff();
}

// grad(W*p) at every cell midpoint.
Eigen::ArrayXd convolution_gradient_field(const GridDensity& g, const InteractionSpec<1>& W) {
  const Eigen::Index m = g.cells();
  Eigen::ArrayXd out(m);
  if (W.is_zero) {
    out.setZero();
    return out;
  }
  if (W.is_quadratic) {
    const double m1 = barycenter(g);
    for (Eigen::Index i = 0; i < m; ++i) out(i) = W.quad_coeff * (g.midpoint(i) - m1);
    return out;
  }
  for (Eigen::Index i = 0; i < m; ++i) out(i) = convolve_gradient(W, g, g.midpoint(i));
  return out;
}

Eigen::ArrayXd convolution_value_field(const GridDensity& g, const InteractionSpec<1>& W) {
  const Eigen::Index m = g.cells();
  Eigen::ArrayXd out(m);
  if (W.is_zero) {
    out.setZero();
    return out;
  }
  if (W.is_quadratic) {
    const double m1 = barycenter(g);
    const double m2 = second_moment(g);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double x = g.midpoint(i);
      out(i) = 0.5 * W.quad_coeff * (x * x - 2.0 * m1 * x + m2);
    }
    return out;
  }
  for (Eigen::Index i = 0; i < m; ++i) out(i) = convolve_value(W, g, g.midpoint(i));
  return out;
}

// Score at every midpoint: central log-space differences, one-sided ends.
Eigen::ArrayXd score_field(const GridDensity& g) {
  const Eigen::Index m = g.cells();
  const double floor = effective_floor(g);
  const double dx = g.dx();
  Eigen::ArrayXd lo = (g.cell.max(floor)).log();
  Eigen::ArrayXd s(m);
  s(0) = (lo(1) - lo(0)) / dx;
  s(m - 1) = (lo(m - 1) - lo(m - 2)) / dx;
  for (Eigen::Index i = 1; i + 1 < m; ++i) s(i) = (lo(i + 1) - lo(i - 1)) / (2.0 * dx);
  return s;
}

}  // namespace

FunctionalValue free_energy(const GridDensity& p, const PotentialSpec<1>& V,
                            const InteractionSpec<1>& W) {
  const Eigen::Index m = p.cells();
  const double dx = p.dx();
  const double floor = effective_floor(p);
  const auto wconv = convolution_value_field(p, W);
  FunctionalValue out;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double w = p.cell(i) * dx;
    out.internal += w * std::log(std::max(p.cell(i), floor));
    out.potential += w * V.value(p.midpoint(i));
    out.interaction += 0.5 * w * wconv(i);
  }
  out.total = out.internal + out.potential + out.interaction;
  return out;
}

double relative_entropy(const GridDensity& p, const PotentialSpec<1>& V,
                        const InteractionSpec<1>& W, EntropyReference ref) {
  const Eigen::Index m = p.cells();
  const double dx = p.dx();
  const double floor = effective_floor(p);
  const auto wconv = convolution_value_field(p, W);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double w = p.cell(i) * dx;
    double log_ratio = std::log(std::max(p.cell(i), floor));
    switch (ref) {
      case EntropyReference::Q:
        log_ratio += V.value(p.midpoint(i)) + 0.5 * wconv(i);
        break;
      case EntropyReference::Q_up:
        log_ratio += V.value(p.midpoint(i)) + wconv(i);
        break;
      case EntropyReference::lebesgue:
        break;
    }
    acc += w * log_ratio;
  }
  return acc;
}

double relative_fisher(const GridDensity& p, const PotentialSpec<1>& V,
                       const InteractionSpec<1>& W) {
  const Eigen::Index m = p.cells();
  const double dx = p.dx();
  const auto sc = score_field(p);
  const auto wg = convolution_gradient_field(p, W);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double b = sc(i) + V.gradient(p.midpoint(i)) + wg(i);
    acc += b * b * p.cell(i) * dx;
  }
  return acc;
}

double beta_correction_direct(const GridDensity& p, const PotentialSpec<1>& V,
                              const InteractionSpec<1>& W, const PerturbationSpec<1>& beta) {
  if (beta.is_zero) return 0.0;
  const auto wg = convolution_gradient_field(p, W);
  const double dx = p.dx();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.cells(); ++i) {
    const double x = p.midpoint(i);
    acc += ((V.gradient(x) + wg(i)) * beta.gradient(x) - beta.laplacian(x)) * p.cell(i) * dx;
  }
  return acc;
}

double beta_correction_ibp(const GridDensity& p, const PotentialSpec<1>& V,
                           const InteractionSpec<1>& W, const PerturbationSpec<1>& beta) {
  if (beta.is_zero) return 0.0;
  const auto sc = score_field(p);
  const auto wg = convolution_gradient_field(p, W);
  const double dx = p.dx();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.cells(); ++i) {
    const double x = p.midpoint(i);
    acc += (sc(i) + V.gradient(x) + wg(i)) * beta.gradient(x) * p.cell(i) * dx;
  }
  return acc;
}

namespace {

DissipationReport dissipation_impl(const std::vector<PdeState>& curve, const PotentialSpec<1>& V,
                                   const InteractionSpec<1>& W, const PerturbationSpec<1>& beta) {
  if (curve.size() < 3) throw Error("dissipation_report: need at least 3 snapshots");
  DissipationReport rep;
  rep.times.reserve(curve.size());
  rep.entropy.reserve(curve.size());
  rep.fisher.reserve(curve.size());
  for (const auto& state : curve) {
    rep.times.push_back(state.time);
    rep.entropy.push_back(relative_entropy(state.grid, V, W, EntropyReference::Q));
    double fisher = relative_fisher(state.grid, V, W);
    if (!beta.is_zero) fisher += beta_correction_direct(state.grid, V, W, beta);
    rep.fisher.push_back(fisher);
  }
  double integral = 0.0;
  rep.residual = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    integral += 0.5 * (rep.fisher[k] + rep.fisher[k - 1]) * (rep.times[k] - rep.times[k - 1]);
    rep.residual = std::max(rep.residual, std::abs(rep.entropy[k] - rep.entropy[0] + integral));
  }
  return rep;
}

}  // namespace

DissipationReport dissipation_report(const std::vector<PdeState>& curve,
                                     const PotentialSpec<1>& V, const InteractionSpec<1>& W) {
  return dissipation_impl(curve, V, W, zero_perturbation());
}

DissipationReport perturbed_dissipation_report(const std::vector<PdeState>& curve,
                                               const PotentialSpec<1>& V,
                                               const InteractionSpec<1>& W,
                                               const PerturbationSpec<1>& beta) {
  return dissipation_impl(curve, V, W, beta);
}

namespace {

// Reversed-slice bookkeeping: slice j of the reversed clock maps to stored
// slice q(j), with s_j measured from the terminal time.
using Slice1 = Eigen::Matrix<double, Eigen::Dynamic, 1>;

struct ReversedView {
  const Bundle* bundle;
  Eigen::Index k;

  Eigen::Index q(Eigen::Index j) const { return bundle->reversed ? j : k - 1 - j; }
  double s(Eigen::Index j) const {
    return bundle->reversed ? bundle->times[static_cast<std::size_t>(j)] -
                                  bundle->times[static_cast<std::size_t>(0)]
                            : bundle->times.back() - bundle->times[static_cast<std::size_t>(q(j))];
  }
  const Slice1& positions(Eigen::Index j) const {
    return bundle->paths[static_cast<std::size_t>(q(j))];
  }
  const LawSnapshot& snapshot(Eigen::Index j) const {
    return bundle->snapshots[static_cast<std::size_t>(q(j))];
  }
};

}  // namespace

FisherPath fisher_process(const Bundle& bundle, const PotentialSpec<1>& V,
                          const InteractionSpec<1>& W,
                          const std::optional<PerturbationSpec<1>>& beta) {
  if (bundle.snapshots.size() != bundle.times.size() || bundle.score_source == ScoreSource::none) {
    throw Error("fisher_process: bundle carries no synchronized law snapshots");
  }
  const ReversedView view{&bundle, bundle.slices()};
  const Eigen::Index k = bundle.slices();
  const Eigen::Index n = bundle.particles();
  const bool perturbed = beta.has_value() && !beta->is_zero;
  const bool quad_w = W.is_quadratic;

  FisherPath path;
  path.s.resize(static_cast<std::size_t>(k));
  path.integrand.resize(n, k);
  path.cumulative.resize(n, k);
  path.mean_path.resize(k);
  path.mean_integrand.resize(k);

  Eigen::ArrayXd ldown(n), cfield(n), gfield(n);
  for (Eigen::Index j = 0; j < k; ++j) {
    path.s[static_cast<std::size_t>(j)] = view.s(j);
    const auto& pos = view.positions(j);
    const auto& snap = view.snapshot(j);

    double mean_x = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) mean_x += pos(i, 0);
    mean_x /= static_cast<double>(n);

    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = pos(i, 0);
      double ld = snap.score(x) + V.gradient(x);
      if (perturbed) ld += beta->gradient(x);
      ldown(i) = ld;
      if (W.is_zero) {
        cfield(i) = 0.0;
      } else if (quad_w) {
        cfield(i) = W.quad_coeff * (x - mean_x);
      } else {
        double acc = 0.0;
        for (Eigen::Index l = 0; l < n; ++l) acc += W.gradient(x - pos(l, 0));
        cfield(i) = acc / static_cast<double>(n);
      }
      double g = 2.0 * ld - V.gradient(x) + cfield(i);
      if (perturbed) g += beta->gradient(x);
      gfield(i) = g;
    }

    // copy-expectation term, leave-one-out over the slice ensemble
    double sum_g = 0.0, sum_xg = 0.0;
    if (quad_w && !W.is_zero) {
      for (Eigen::Index i = 0; i < n; ++i) {
        sum_g += gfield(i);
        sum_xg += pos(i, 0) * gfield(i);
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = pos(i, 0);
      double vgrad = V.gradient(x);
      double half_c = 0.5 * cfield(i);
      double pointwise = ldown(i) * ldown(i) + half_c * cfield(i) +
                         half_c * (2.0 * ldown(i) + vgrad +
                                   (perturbed ? beta->gradient(x) : 0.0));
      double copy_term = 0.0;
      if (!W.is_zero) {
        if (quad_w) {
          copy_term = 0.5 * W.quad_coeff *
                      (x * (sum_g - gfield(i)) - (sum_xg - x * gfield(i))) /
                      static_cast<double>(n - 1);
        } else {
          double acc = 0.0;
          for (Eigen::Index l = 0; l < n; ++l) {
            if (l == i) continue;
            acc += 0.5 * W.gradient(x - pos(l, 0)) * gfield(l);
          }
          copy_term = acc / static_cast<double>(n - 1);
        }
      }
      double value = pointwise - copy_term;
      if (perturbed) value += vgrad * beta->gradient(x) - beta->laplacian(x);
      path.integrand(i, j) = value;
    }
  }

  path.cumulative.col(0).setZero();
  for (Eigen::Index j = 1; j < k; ++j) {
    const double ds = path.s[static_cast<std::size_t>(j)] - path.s[static_cast<std::size_t>(j - 1)];
    path.cumulative.col(j) =
        path.cumulative.col(j - 1) +
        0.5 * ds * (path.integrand.col(j) + path.integrand.col(j - 1));
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    double acc_f = 0.0, acc_i = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc_f += path.cumulative(i, j);
      acc_i += path.integrand(i, j);
    }
    path.mean_path(j) = acc_f / static_cast<double>(n);
    path.mean_integrand(j) = acc_i / static_cast<double>(n);
  }
  return path;
}

namespace {

// log l(x, P) = log p(x) + V(x) + (W*P)(x)/2 with the ensemble standing in
// for P in the convolution.
Eigen::ArrayXd log_likelihood_column(const Slice1& pos, const LawSnapshot& snap,
                                     const PotentialSpec<1>& V, const InteractionSpec<1>& W) {
  const Eigen::Index n = pos.rows();
  Eigen::ArrayXd out(n);
  double m1 = 0.0, m2 = 0.0;
  if (W.is_quadratic && !W.is_zero) {
    for (Eigen::Index i = 0; i < n; ++i) {
      m1 += pos(i, 0);
      m2 += pos(i, 0) * pos(i, 0);
    }
    m1 /= static_cast<double>(n);
    m2 /= static_cast<double>(n);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = pos(i, 0);
    double w = 0.0;
    if (!W.is_zero) {
      if (W.is_quadratic) {
        w = 0.5 * W.quad_coeff * (x * x - 2.0 * m1 * x + m2);
      } else {
        double acc = 0.0;
        for (Eigen::Index l = 0; l < n; ++l) acc += W.value(x - pos(l, 0));
        w = acc / static_cast<double>(n);
      }
    }
    out(i) = snap.log_density(x) + V.value(x) + 0.5 * w;
  }
  return out;
}

Eigen::ArrayXd grad_log_likelihood_sq_column(const Slice1& pos, const LawSnapshot& snap,
                                             const PotentialSpec<1>& V,
                                             const InteractionSpec<1>& W) {
  const Eigen::Index n = pos.rows();
  Eigen::ArrayXd out(n);
  double m1 = 0.0;
  if (W.is_quadratic && !W.is_zero) {
    for (Eigen::Index i = 0; i < n; ++i) m1 += pos(i, 0);
    m1 /= static_cast<double>(n);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = pos(i, 0);
    double c = 0.0;
    if (!W.is_zero) {
      if (W.is_quadratic) {
        c = W.quad_coeff * (x - m1);
      } else {
        double acc = 0.0;
        for (Eigen::Index l = 0; l < n; ++l) acc += W.gradient(x - pos(l, 0));
        c = acc / static_cast<double>(n);
      }
    }
    const double g = snap.score(x) + V.gradient(x) + 0.5 * c;
    out(i) = g * g;
  }
  return out;
}

Eigen::Index nearest_slice(const std::vector<double>& s, double target) {
  Eigen::Index best = 0;
  double gap = std::abs(s[0] - target);
  for (std::size_t j = 1; j < s.size(); ++j) {
    const double g = std::abs(s[j] - target);
    if (g < gap) {
      gap = g;
      best = static_cast<Eigen::Index>(j);
    }
  }
  return best;
}

}  // namespace

MartingaleReport martingale_report(const Bundle& bundle, const FisherPath& path,
                                   const PotentialSpec<1>& V, const InteractionSpec<1>& W,
                                   const std::vector<double>& probe_fractions, int bins) {
  if (bundle.snapshots.size() != bundle.times.size()) {
    throw Error("martingale_report: bundle carries no snapshots");
  }
  const ReversedView view{&bundle, bundle.slices()};
  const Eigen::Index k = bundle.slices();
  const Eigen::Index n = bundle.particles();
  const double span = path.s.back();

  std::vector<Eigen::Index> probe_slices;
  probe_slices.reserve(probe_fractions.size());
  for (double f : probe_fractions) probe_slices.push_back(nearest_slice(path.s, f * span));

  MartingaleReport rep;
  rep.probes.resize(probe_fractions.size());

  Eigen::ArrayXd loglr0 = log_likelihood_column(view.positions(0), view.snapshot(0), V, W);
  Eigen::ArrayXd m_prev = Eigen::ArrayXd::Zero(n);
  Eigen::ArrayXd qv = Eigen::ArrayXd::Zero(n);
  Eigen::ArrayXd gsq_prev = grad_log_likelihood_sq_column(view.positions(0), view.snapshot(0), V, W);
  double predicted_qv = 0.0;

  for (Eigen::Index j = 1; j < k; ++j) {
    const auto& pos = view.positions(j);
    Eigen::ArrayXd loglr = log_likelihood_column(pos, view.snapshot(j), V, W);
    Eigen::ArrayXd m_cur = (loglr - loglr0) - path.cumulative.col(j).array();
    qv += (m_cur - m_prev).square();

    Eigen::ArrayXd gsq = grad_log_likelihood_sq_column(pos, view.snapshot(j), V, W);
    const double ds = path.s[static_cast<std::size_t>(j)] - path.s[static_cast<std::size_t>(j - 1)];
    predicted_qv += 0.5 * ds * 2.0 * (gsq.mean() + gsq_prev.mean());
    gsq_prev.swap(gsq);

    for (std::size_t pi = 0; pi < probe_slices.size(); ++pi) {
      if (probe_slices[pi] != j) continue;
      ProbeStat& st = rep.probes[pi];
      st.s = path.s[static_cast<std::size_t>(j)];
      st.mean = m_cur.mean();
      st.std_error = std::sqrt((m_cur - st.mean).square().sum() /
                               static_cast<double>(n - 1) / static_cast<double>(n));
      // conditional-increment t statistics over position-quantile bins at the
      // previous slice (a G_s-measurable conditioning variable)
      const auto& prev_pos = view.positions(j - 1);
      std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
      std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return prev_pos(a, 0) < prev_pos(b, 0);
      });
      double max_t = 0.0;
      for (int b = 0; b < bins; ++b) {
        const auto lo = static_cast<Eigen::Index>(static_cast<double>(n) * b / bins);
        const auto hi = static_cast<Eigen::Index>(static_cast<double>(n) * (b + 1) / bins);
        if (hi - lo < 2) continue;
        double mean = 0.0;
        for (Eigen::Index r = lo; r < hi; ++r) {
          const Eigen::Index i = order[static_cast<std::size_t>(r)];
          mean += m_cur(i) - m_prev(i);
        }
        mean /= static_cast<double>(hi - lo);
        double ss = 0.0;
        for (Eigen::Index r = lo; r < hi; ++r) {
          const Eigen::Index i = order[static_cast<std::size_t>(r)];
          const double d = (m_cur(i) - m_prev(i)) - mean;
          ss += d * d;
        }
        const double se =
            std::sqrt(ss / static_cast<double>(hi - lo - 1) / static_cast<double>(hi - lo));
        if (se > 0.0) max_t = std::max(max_t, std::abs(mean / se));
      }
      st.max_bin_tstat = max_t;
    }
    m_prev.swap(m_cur);
  }
  rep.qv_ratio = qv.mean() / predicted_qv;
  return rep;
}

double snapshot_fisher_information(const LawSnapshot& snap, const PotentialSpec<1>& V,
                                   const InteractionSpec<1>& W) {
  if (const auto* g = std::get_if<GaussianState>(&snap.law)) {
    if (V.is_quadratic && (W.is_zero || W.is_quadratic)) {
      const double kv = V.quad_coeff;
      const double kw = W.is_zero ? 0.0 : W.quad_coeff;
      const double a = kv + kw - 1.0 / g->variance;
      return g->variance * a * a + kv * kv * g->mean * g->mean;
    }
    const GridDensity grid = gaussian_density_on_grid(*g, 2048);
    return relative_fisher(grid, V, W);
  }
  return relative_fisher(std::get<GridDensity>(snap.law), V, W);
}

CompensatorCheck compensator_expectation_check(const Bundle& bundle, const FisherPath& path,
                                               const PotentialSpec<1>& V,
                                               const InteractionSpec<1>& W,
                                               const std::vector<double>& probe_fractions) {
  const ReversedView view{&bundle, bundle.slices()};
  const Eigen::Index k = bundle.slices();
  const Eigen::Index n = bundle.particles();
  const double span = path.s.back();

  // int_0^s I(P_u | Q_u^up) du from the snapshot laws (trapezoid)
  Eigen::ArrayXd fisher(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    fisher(j) = snapshot_fisher_information(view.snapshot(j), V, W);
  }
  Eigen::ArrayXd integral(k);
  integral(0) = 0.0;
  for (Eigen::Index j = 1; j < k; ++j) {
    const double ds = path.s[static_cast<std::size_t>(j)] - path.s[static_cast<std::size_t>(j - 1)];
    integral(j) = integral(j - 1) + 0.5 * ds * (fisher(j) + fisher(j - 1));
  }

  CompensatorCheck check;
  for (double f : probe_fractions) {
    const Eigen::Index j = nearest_slice(path.s, f * span);
    check.s.push_back(path.s[static_cast<std::size_t>(j)]);
    check.mean_cumulative.push_back(path.mean_path(j));
    check.integrated_fisher.push_back(integral(j));
    const double sd = std::sqrt(
        (path.cumulative.col(j).array() - path.mean_path(j)).square().sum() /
        static_cast<double>(n - 1));
    check.std_error.push_back(sd / std::sqrt(static_cast<double>(n)));
    check.max_residual =
        std::max(check.max_residual, std::abs(path.mean_path(j) - integral(j)));
  }
  return check;
}

}  // namespace mkv
