#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "mkvflow/measures.hpp"
#include "mkvflow/potentials.hpp"

namespace mkv {

enum class Scheme { euler_maruyama, exact_ou, exact_nl };
enum class ScoreSource { none, analytic_gaussian, grid_pde, kde_experimental };

// Law snapshot synchronized with a recorded time slice; supplies log p and
// the score for the time-reversed diagnostics.
struct LawSnapshot {
  double time = 0.0;
  std::variant<GaussianState, GridDensity> law;

  double log_density(double x) const;
  double score(double x) const;
  bool gaussian() const { return std::holds_alternative<GaussianState>(law); }
};

template <int Dim = 1>
struct SimConfig {
  PotentialSpec<Dim> confinement;
  InteractionSpec<Dim> interaction;
  PerturbationSpec<1> beta = zero_perturbation();  // acts in 1-D runs only
  Eigen::Index n_particles = 1000;
  double horizon = 1.0;  // T
  double dt = 1e-3;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::euler_maruyama;
  Eigen::Index record_stride = 1;
  int threads = 1;
  // Initial law, when known; lets catalog configurations carry analytic
  // Gaussian snapshots for the score fields.
  std::optional<GaussianState> init_law;
  double safety_box_halfwidth = 0.0;  // 0: auto (initial box inflated 10x)
};

template <int Dim = 1>
struct TrajectoryBundle {
  std::vector<double> times;  // K recorded stamps
  // K slices of N x Dim positions; noise has K-1 slices and is recorded only
  // at record_stride == 1 (otherwise intermediate draws are not replayable).
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, Dim>> paths;
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, Dim>> noise;
  ScoreSource score_source = ScoreSource::none;
  std::vector<LawSnapshot> snapshots;  // K entries when score_source != none
  std::uint64_t seed = 0;
  double dt = 0.0;
  Eigen::Index record_stride = 1;
  double t_start = 0.0;
  bool reversed = false;

  Eigen::Index slices() const { return static_cast<Eigen::Index>(times.size()); }
  Eigen::Index particles() const { return paths.empty() ? 0 : paths.front().rows(); }
};

using Bundle = TrajectoryBundle<1>;

// Interacting-particle simulation of dX = -(grad V + grad W*P) dt + sqrt(2) dB
// with the empirical measure standing in for P_t. Deterministic given the
// seed for any thread count. Throws DivergenceError when particles leave the
// safety box.
template <int Dim = 1>
TrajectoryBundle<Dim> simulate(const SimConfig<Dim>& cfg, const ParticleEnsemble<Dim>& init);

// Perturbed dynamics from time t0 with confinement V + beta and initial law
// P_{t0}. Noise draws are keyed by absolute step index, so beta == 0
// reproduces the unperturbed paths bit-exactly.
Bundle simulate_perturbed(const SimConfig<1>& cfg, double t0, const Ensemble& init_at_t0);

// Exact transition of dX = -X dt + sqrt(2) dB.
double exact_ou_step(double x, double dt, double xi);

// Re-run the stepping rule from the recorded noise; used to check the replay
// invariant. Requires record_stride == 1.
Bundle replay(const SimConfig<1>& cfg, const Ensemble& init, const Bundle& recorded);

// Pure re-indexing onto the reversed clock s = T - t.
template <int Dim>
TrajectoryBundle<Dim> time_reverse(const TrajectoryBundle<Dim>& bundle);

// Attach PDE-solved snapshots (matched to recorded times) for configurations
// without a closed-form law.
struct PdeState;
void attach_grid_snapshots(Bundle& bundle, const std::vector<PdeState>& curve);

// Experimental: score fields estimated from the particles themselves via a
// kernel density estimate per slice. Noisier than the analytic or PDE routes;
// never the primary diagnostics path. bandwidth <= 0 picks the Silverman rule
// per slice.
void attach_kde_snapshots(Bundle& bundle, Eigen::Index cells = 1024, double bandwidth = 0.0);

bool is_catalog_ou(const SimConfig<1>& cfg);
bool is_catalog_nl(const SimConfig<1>& cfg);

}  // namespace mkv
