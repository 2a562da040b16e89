#pragma once

#include <vector>

#include "mkvflow/measures.hpp"
#include "mkvflow/potentials.hpp"

namespace mkv {

struct PdeProblem {
  PotentialSpec<1> confinement;
  InteractionSpec<1> interaction;
  PerturbationSpec<1> beta = zero_perturbation();
};

struct PdeState {
  GridDensity grid;
  double time = 0.0;
};

// Largest admissible explicit step: 0.4 dx^2 / (2 + dx max|b|) with the drift
// b = grad(V + beta + W*p) evaluated on the current density.
double stable_dt(const PdeProblem& prob, const PdeState& state);

// One conservative finite-volume step of
//   dp/dt = d/dx (p_x + p b),  b = (V + beta + W*p)',
// exponential fitting (Chang-Cooper / Scharfetter-Gummel) with no-flux
// boundaries. Face drifts use potential differences, so the discrete Gibbs
// state exp(-V - W*p) is preserved exactly in the linear case. Mass is
// conserved by flux telescoping. Throws StabilityError naming the admissible
// dt when the bound is violated.
PdeState step(const PdeProblem& prob, const PdeState& state, double dt);

// Same stepping rule with the perturbed confinement V + beta; provided as a
// named entry point mirroring the unperturbed one.
PdeState step_perturbed(const PdeProblem& prob, const PdeState& state, double dt);

// grad log p by central differences of log cell values, interpolated to x.
// Throws CoverageError outside the domain.
double score(const PdeState& state, double x);
double score(const GridDensity& grid, double x);

// March from `initial` to time T with fixed dt (dt <= 0 picks half the
// initial stability bound), recording every snapshot_stride-th state;
// includes t = 0 and t = T. snapshot_stride <= 0 targets a spacing of 1e-3.
std::vector<PdeState> solve_curve(const PdeProblem& prob, const GridDensity& initial, double T,
                                  double dt, Eigen::Index snapshot_stride);

}  // namespace mkv
