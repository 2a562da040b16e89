#include "mkvflow/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "mkvflow/oracles.hpp"
#include "mkvflow/pde.hpp"
#include "mkvflow/rng.hpp"

namespace mkv {
namespace {

constexpr Eigen::Index kBlock = 8192;

// Runs body(lo, hi) over fixed-size index blocks. Blocks are the unit of
// scheduling, so any thread count produces the same per-block results; any
// reduction that combines per-block partials in block order is
// schedule-independent.
template <typename Body>
void parallel_blocks(Eigen::Index n, int threads, const Body& body) {
  const Eigen::Index blocks = (n + kBlock - 1) / kBlock;
  if (threads <= 1 || blocks <= 1) {
    for (Eigen::Index b = 0; b < blocks; ++b) {
      body(b, b * kBlock, std::min(n, (b + 1) * kBlock));
    }
    return;
  }
  std::atomic<Eigen::Index> next{0};
  auto worker = [&]() {
    while (true) {
      const Eigen::Index b = next.fetch_add(1);
      if (b >= blocks) return;
      body(b, b * kBlock, std::min(n, (b + 1) * kBlock));
    }
  };
  std::vector<std::thread> pool;
  const int use = std::min<int>(threads, static_cast<int>(blocks));
  pool.reserve(use);
  for (int t = 0; t < use; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

template <typename PerIndex>
double deterministic_sum(Eigen::Index n, int threads, const PerIndex& f) {
  const Eigen::Index blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(static_cast<std::size_t>(blocks), 0.0);
  parallel_blocks(n, threads, [&](Eigen::Index b, Eigen::Index lo, Eigen::Index hi) {
    double acc = 0.0;
    for (Eigen::Index i = lo; i < hi; ++i) acc += f(i);
    partial[static_cast<std::size_t>(b)] = acc;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

template <int Dim>
using Slice = Eigen::Matrix<double, Eigen::Dynamic, Dim>;

template <int Dim>
Point<Dim> row_point(const Slice<Dim>& s, Eigen::Index i) {
  if constexpr (Dim == 1) {
    return s(i, 0);
  } else {
    return s.row(i).transpose();
  }
}

template <int Dim>
void set_row(Slice<Dim>& s, Eigen::Index i, const Point<Dim>& p) {
  if constexpr (Dim == 1) {
    s(i, 0) = p;
  } else {
    s.row(i) = p.transpose();
  }
}

// Mean-field drift -grad(W * emp)(x_i) with the empirical measure of the
// other particles (j != i). Quadratic W gets the leave-one-out mean
// shortcut; otherwise the O(N^2) pairwise sum.
template <int Dim>
void interaction_drift(const InteractionSpec<Dim>& W, const Slice<Dim>& pos, int threads,
                       Slice<Dim>& out) {
  const Eigen::Index n = pos.rows();
  if (W.is_zero || n < 2) {
    out.setZero();
    return;
  }
  if (W.is_quadratic) {
    const double a = W.quad_coeff;
    for (int d = 0; d < Dim; ++d) {
      const double total = deterministic_sum(n, threads, [&](Eigen::Index i) { return pos(i, d); });
      auto col = out.col(d);
      parallel_blocks(n, threads, [&](Eigen::Index, Eigen::Index lo, Eigen::Index hi) {
        for (Eigen::Index i = lo; i < hi; ++i) {
          const double loo_mean = (total - pos(i, d)) / static_cast<double>(n - 1);
          col(i) = -a * (pos(i, d) - loo_mean);
        }
      });
    }
    return;
  }
  parallel_blocks(n, threads, [&](Eigen::Index, Eigen::Index lo, Eigen::Index hi) {
    for (Eigen::Index i = lo; i < hi; ++i) {
      Point<Dim> acc = zero_point<Dim>();
      const Point<Dim> xi = row_point<Dim>(pos, i);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        if constexpr (Dim == 1) {
          acc += W.gradient(xi - row_point<Dim>(pos, j));
        } else {
          acc += W.gradient((xi - row_point<Dim>(pos, j)).eval());
        }
      }
      set_row<Dim>(out, i, Point<Dim>(-acc / static_cast<double>(n - 1)));
    }
  });
}

template <int Dim>
struct Box {
  Point<Dim> center;
  double halfwidth;
  bool inside(const Point<Dim>& p) const {
    if constexpr (Dim == 1) {
      return std::abs(p - center) <= halfwidth;
    } else {
      return ((p - center).cwiseAbs().maxCoeff() <= halfwidth);
    }
  }
};

template <int Dim>
Box<Dim> safety_box(const Slice<Dim>& init, double requested) {
  Box<Dim> box;
  if constexpr (Dim == 1) {
    const double lo = init.col(0).minCoeff();
    const double hi = init.col(0).maxCoeff();
    box.center = 0.5 * (lo + hi);
    box.halfwidth = requested > 0 ? requested : 10.0 * std::max(0.5 * (hi - lo), 1.0);
  } else {
    Point<Dim> lo, hi;
    for (int d = 0; d < Dim; ++d) {
      lo(d) = init.col(d).minCoeff();
      hi(d) = init.col(d).maxCoeff();
    }
    box.center = 0.5 * (lo + hi);
    box.halfwidth = requested > 0 ? requested : 10.0 * std::max(0.5 * (hi - lo).maxCoeff(), 1.0);
  }
  return box;
}

enum class NoiseMode { draw, replayed };

template <int Dim>
TrajectoryBundle<Dim> run_sim(const SimConfig<Dim>& cfg, const ParticleEnsemble<Dim>& init,
                              double t_start, NoiseMode noise_mode,
                              const std::vector<Slice<Dim>>* injected_noise) {
  if (!(cfg.dt > 0.0) || cfg.dt > cfg.horizon - t_start + 1e-15) {
    throw ConfigError("simulate: need 0 < dt <= horizon");
  }
  if (init.size() < 2) throw InvalidMeasureError("simulate: need at least 2 particles");
  if (cfg.record_stride < 1) throw ConfigError("simulate: record_stride must be >= 1");
  const double span = cfg.horizon - t_start;
  const auto steps = static_cast<Eigen::Index>(std::llround(span / cfg.dt));
  if (std::abs(static_cast<double>(steps) * cfg.dt - span) > 1e-9 * std::max(1.0, span)) {
    throw ConfigError("simulate: horizon - t0 must be an integer multiple of dt");
  }
  if (steps % cfg.record_stride != 0) {
    throw ConfigError("simulate: step count must be a multiple of record_stride");
  }
  const auto step_offset = static_cast<Eigen::Index>(std::llround(t_start / cfg.dt));

  const bool catalog_ou = [&] {
    if constexpr (Dim == 1) return is_catalog_ou(cfg);
    return false;
  }();
  const bool catalog_nl = [&] {
    if constexpr (Dim == 1) return is_catalog_nl(cfg);
    return false;
  }();
  if (cfg.scheme == Scheme::exact_ou && !(catalog_ou && cfg.init_law)) {
    throw ConfigError("exact_ou needs V = x^2/2, W = 0, beta = 0 and a Gaussian initial law");
  }
  if (cfg.scheme == Scheme::exact_nl && !(catalog_nl && cfg.init_law)) {
    throw ConfigError("exact_nl needs V = 0, W = x^2/2, beta = 0 and a Gaussian initial law");
  }
  if constexpr (Dim != 1) {
    if (!cfg.beta.is_zero) throw ConfigError("perturbations are supported in 1-D only");
  }

  const Eigen::Index n = init.size();
  const bool record_noise = (cfg.record_stride == 1);
  TrajectoryBundle<Dim> bundle;
  bundle.seed = cfg.seed;
  bundle.dt = cfg.dt;
  bundle.record_stride = cfg.record_stride;
  bundle.t_start = t_start;
  bundle.times.reserve(static_cast<std::size_t>(steps / cfg.record_stride) + 1);
  bundle.paths.reserve(static_cast<std::size_t>(steps / cfg.record_stride) + 1);

  Slice<Dim> pos = init.positions;
  Slice<Dim> drift(n, Dim);
  Slice<Dim> xi(n, Dim);
  const auto box = safety_box<Dim>(pos, cfg.safety_box_halfwidth);

  bundle.times.push_back(t_start);
  bundle.paths.push_back(pos);

  const double em = std::exp(-cfg.dt);
  const double exact_noise_scale = std::sqrt(1.0 - std::exp(-2.0 * cfg.dt));
  const double euler_noise_scale = std::sqrt(2.0 * cfg.dt);

  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::Index global_step = step_offset + k;
    if (noise_mode == NoiseMode::draw) {
      parallel_blocks(n, cfg.threads, [&](Eigen::Index, Eigen::Index lo, Eigen::Index hi) {
        for (Eigen::Index i = lo; i < hi; ++i) {
          for (int d = 0; d < Dim; ++d) {
            xi(i, d) = rng::normal(cfg.seed, static_cast<std::uint64_t>(i),
                                   static_cast<std::uint64_t>(global_step) * Dim +
                                       static_cast<std::uint64_t>(d),
                                   rng::Purpose::sim_noise);
          }
        }
      });
    } else {
      if (static_cast<Eigen::Index>(injected_noise->size()) != steps) {
        throw ConfigError("replay: noise slice count does not match the step count");
      }
      xi = (*injected_noise)[static_cast<std::size_t>(k)];
    }

    if (cfg.scheme == Scheme::euler_maruyama) {
      interaction_drift(cfg.interaction, pos, cfg.threads, drift);
      parallel_blocks(n, cfg.threads, [&](Eigen::Index, Eigen::Index lo, Eigen::Index hi) {
        for (Eigen::Index i = lo; i < hi; ++i) {
          const Point<Dim> x = row_point<Dim>(pos, i);
          Point<Dim> d = row_point<Dim>(drift, i);
          if (!cfg.confinement.is_zero) d -= cfg.confinement.gradient(x);
          if constexpr (Dim == 1) {
            if (!cfg.beta.is_zero) d -= cfg.beta.gradient(x);
          }
          set_row<Dim>(pos, i,
                       Point<Dim>(x + d * cfg.dt + euler_noise_scale * row_point<Dim>(xi, i)));
        }
      });
    } else {
      // exact transition of the (equivalent) OU deviation dynamics
      const double m0 = cfg.init_law->mean;
      const double mean_prev =
          (cfg.scheme == Scheme::exact_ou)
              ? m0 * std::exp(-(static_cast<double>(k) * cfg.dt + t_start))
              : m0;
      const double mean_next = (cfg.scheme == Scheme::exact_ou) ? mean_prev * em : m0;
      parallel_blocks(n, cfg.threads, [&](Eigen::Index, Eigen::Index lo, Eigen::Index hi) {
        for (Eigen::Index i = lo; i < hi; ++i) {
          const double y = pos(i, 0) - mean_prev;
          pos(i, 0) = mean_next + em * y + exact_noise_scale * xi(i, 0);
        }
      });
    }

    bool escaped = false;
    for (Eigen::Index i = 0; i < n && !escaped; ++i) {
      if (!box.inside(row_point<Dim>(pos, i))) escaped = true;
    }
    if (escaped) {
      throw DivergenceError("particle escaped the safety box at t = " +
                            std::to_string(t_start + static_cast<double>(k + 1) * cfg.dt) +
                            "; dt is too large for this drift");
    }

    if (record_noise) bundle.noise.push_back(xi);
    if ((k + 1) % cfg.record_stride == 0) {
      bundle.times.push_back(t_start + static_cast<double>(k + 1) * cfg.dt);
      bundle.paths.push_back(pos);
    }
  }

  if constexpr (Dim == 1) {
    if (cfg.init_law && (catalog_ou || catalog_nl)) {
      bundle.score_source = ScoreSource::analytic_gaussian;
      bundle.snapshots.reserve(bundle.times.size());
      for (double t : bundle.times) {
        GaussianState law;
        law.variance = ou_variance(t, cfg.init_law->variance);
        law.mean = catalog_ou ? cfg.init_law->mean * std::exp(-t) : cfg.init_law->mean;
        bundle.snapshots.push_back(LawSnapshot{t, law});
      }
    }
  }
  return bundle;
}

}  // namespace

double LawSnapshot::log_density(double x) const {
  if (const auto* g = std::get_if<GaussianState>(&law)) {
    const double z = x - g->mean;
    return -0.5 * std::log(2.0 * M_PI * g->variance) - z * z / (2.0 * g->variance);
  }
  const auto& grid = std::get<GridDensity>(law);
  if (!grid.contains(x)) throw CoverageError("log_density: point outside grid domain");
  const double dx = grid.dx();
  const double pos = (x - grid.lo) / dx - 0.5;
  const auto j = static_cast<Eigen::Index>(std::floor(pos));
  if (j < 0) return std::log(grid.cell(0));
  if (j >= grid.cells() - 1) return std::log(grid.cell(grid.cells() - 1));
  const double w = pos - static_cast<double>(j);
  return (1.0 - w) * std::log(grid.cell(j)) + w * std::log(grid.cell(j + 1));
}

double LawSnapshot::score(double x) const {
  if (const auto* g = std::get_if<GaussianState>(&law)) {
    return -(x - g->mean) / g->variance;
  }
  return mkv::score(std::get<GridDensity>(law), x);
}

template <int Dim>
TrajectoryBundle<Dim> simulate(const SimConfig<Dim>& cfg, const ParticleEnsemble<Dim>& init) {
  if constexpr (Dim == 1) {
    SimConfig<Dim> unperturbed = cfg;
    unperturbed.beta = zero_perturbation();
    if (!cfg.beta.is_zero) {
      throw ConfigError("simulate: use simulate_perturbed for beta != 0");
    }
    return run_sim<Dim>(unperturbed, init, 0.0, NoiseMode::draw, nullptr);
  } else {
    return run_sim<Dim>(cfg, init, 0.0, NoiseMode::draw, nullptr);
  }
}

Bundle simulate_perturbed(const SimConfig<1>& cfg, double t0, const Ensemble& init_at_t0) {
  if (t0 < 0.0 || t0 > cfg.horizon) throw ConfigError("simulate_perturbed: need 0 <= t0 <= T");
  const double ratio = t0 / cfg.dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw ConfigError("simulate_perturbed: t0 must be an integer multiple of dt");
  }
  SimConfig<1> c = cfg;
  if (c.scheme != Scheme::euler_maruyama) {
    throw ConfigError("simulate_perturbed: only the Euler-Maruyama scheme supports beta");
  }
  if (!cfg.beta.is_zero) c.init_law.reset();  // perturbed law has no closed form
  return run_sim<1>(c, init_at_t0, t0, NoiseMode::draw, nullptr);
}

double exact_ou_step(double x, double dt, double xi) {
  if (!(dt > 0.0)) throw ConfigError("exact_ou_step: dt must be positive");
  return std::exp(-dt) * x + std::sqrt(1.0 - std::exp(-2.0 * dt)) * xi;
}

Bundle replay(const SimConfig<1>& cfg, const Ensemble& init, const Bundle& recorded) {
  if (recorded.record_stride != 1 || recorded.noise.empty()) {
    throw ConfigError("replay: bundle must carry per-step noise (record_stride == 1)");
  }
  return run_sim<1>(cfg, init, recorded.t_start, NoiseMode::replayed, &recorded.noise);
}

template <int Dim>
TrajectoryBundle<Dim> time_reverse(const TrajectoryBundle<Dim>& bundle) {
  TrajectoryBundle<Dim> rev = bundle;
  const double t_end = bundle.times.empty() ? 0.0 : bundle.times.back();
  const auto k = bundle.slices();
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index src = k - 1 - j;
    rev.times[static_cast<std::size_t>(j)] = t_end - bundle.times[static_cast<std::size_t>(src)];
    rev.paths[static_cast<std::size_t>(j)] = bundle.paths[static_cast<std::size_t>(src)];
  }
  if (!bundle.snapshots.empty()) {
    for (Eigen::Index j = 0; j < k; ++j) {
      rev.snapshots[static_cast<std::size_t>(j)] =
          bundle.snapshots[static_cast<std::size_t>(k - 1 - j)];
      rev.snapshots[static_cast<std::size_t>(j)].time =
          rev.times[static_cast<std::size_t>(j)];
    }
  }
  std::reverse(rev.noise.begin(), rev.noise.end());
  rev.reversed = !bundle.reversed;
  rev.t_start = rev.times.empty() ? 0.0 : rev.times.front();
  return rev;
}

void attach_grid_snapshots(Bundle& bundle, const std::vector<PdeState>& curve) {
  bundle.snapshots.clear();
  bundle.snapshots.reserve(bundle.times.size());
  for (double t : bundle.times) {
    const PdeState* best = nullptr;
    double best_gap = 1e-6;
    for (const auto& s : curve) {
      const double gap = std::abs(s.time - t);
      if (gap < best_gap) {
        best = &s;
        best_gap = gap;
      }
    }
    if (best == nullptr) {
      throw Error("attach_grid_snapshots: no PDE snapshot within 1e-6 of t = " +
                  std::to_string(t));
    }
    bundle.snapshots.push_back(LawSnapshot{t, best->grid});
  }
  bundle.score_source = ScoreSource::grid_pde;
}

void attach_kde_snapshots(Bundle& bundle, Eigen::Index cells, double bandwidth) {
  bundle.snapshots.clear();
  bundle.snapshots.reserve(bundle.times.size());
  for (std::size_t k = 0; k < bundle.times.size(); ++k) {
    Ensemble slice;
    slice.positions = bundle.paths[k];
    slice.time_stamp = bundle.times[k];
    const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(slice);
    const double lo = slice.positions.minCoeff() - 8.0 * h;
    const double hi = slice.positions.maxCoeff() + 8.0 * h;
    bundle.snapshots.push_back(
        LawSnapshot{bundle.times[k], density_from_ensemble(slice, lo, hi, cells, h)});
  }
  bundle.score_source = ScoreSource::kde_experimental;
}

bool is_catalog_ou(const SimConfig<1>& cfg) {
  return cfg.confinement.is_quadratic && cfg.confinement.quad_coeff == 1.0 &&
         cfg.interaction.is_zero && cfg.beta.is_zero;
}

bool is_catalog_nl(const SimConfig<1>& cfg) {
  return cfg.confinement.is_zero && cfg.interaction.is_quadratic &&
         cfg.interaction.quad_coeff == 1.0 && cfg.beta.is_zero;
}

template TrajectoryBundle<1> simulate<1>(const SimConfig<1>&, const ParticleEnsemble<1>&);
template TrajectoryBundle<2> simulate<2>(const SimConfig<2>&, const ParticleEnsemble<2>&);
template TrajectoryBundle<1> time_reverse<1>(const TrajectoryBundle<1>&);
template TrajectoryBundle<2> time_reverse<2>(const TrajectoryBundle<2>&);

}  // namespace mkv
