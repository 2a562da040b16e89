#pragma once

#include <optional>
#include <vector>

#include "mkvflow/measures.hpp"
#include "mkvflow/pde.hpp"
#include "mkvflow/potentials.hpp"
#include "mkvflow/sim.hpp"

namespace mkv {

// Free energy split F = U + V + W (internal + potential + interaction).
struct FunctionalValue {
  double internal = 0.0;
  double potential = 0.0;
  double interaction = 0.0;
  double total = 0.0;
};

FunctionalValue free_energy(const GridDensity& p, const PotentialSpec<1>& V,
                            const InteractionSpec<1>& W);

enum class EntropyReference { Q, Q_up, lebesgue };

// H(p | reference): int p log(p/q) with q = e^{-Psi}, e^{-Psi_up} or 1.
// Against Q this equals free_energy(...).total by construction (identical
// quadratures).
double relative_entropy(const GridDensity& p, const PotentialSpec<1>& V,
                        const InteractionSpec<1>& W, EntropyReference ref);

// I(p | Q_up) = int |grad log p + grad V + grad(W*p)|^2 p dx >= 0.
double relative_fisher(const GridDensity& p, const PotentialSpec<1>& V,
                       const InteractionSpec<1>& W);

// Extra dissipation of the perturbed curve:
//   int (<grad V + grad(W*p), grad beta> - lap beta) p dx,
// and the same quantity after integrating by parts,
//   int <grad log l_up, grad beta> p dx.
double beta_correction_direct(const GridDensity& p, const PotentialSpec<1>& V,
                              const InteractionSpec<1>& W, const PerturbationSpec<1>& beta);
double beta_correction_ibp(const GridDensity& p, const PotentialSpec<1>& V,
                           const InteractionSpec<1>& W, const PerturbationSpec<1>& beta);

struct DissipationReport {
  std::vector<double> times;
  std::vector<double> entropy;  // H(P_t | Q_t)
  std::vector<double> fisher;   // I(P_t | Q_t^up) (+ beta correction if any)
  double residual = 0.0;        // max_t |H(t) - H(0) + int_0^t I du|
  std::string quadrature = "trapezoid";
};

// Certifies H(P_t|Q_t) - H(P_0|Q_0) = -int I du along a PDE curve.
DissipationReport dissipation_report(const std::vector<PdeState>& curve,
                                     const PotentialSpec<1>& V, const InteractionSpec<1>& W);

// Perturbed identity: the integrand gains the beta correction term.
DissipationReport perturbed_dissipation_report(const std::vector<PdeState>& curve,
                                               const PotentialSpec<1>& V,
                                               const InteractionSpec<1>& W,
                                               const PerturbationSpec<1>& beta);

// Per-trajectory cumulative Fisher information on the reversed clock.
struct FisherPath {
  std::vector<double> s;        // reversed time grid, s[0] = 0
  Eigen::MatrixXd integrand;    // N x K samples of I_s
  Eigen::MatrixXd cumulative;   // N x K, F_s = trapezoid of integrand, F_0 = 0
  Eigen::ArrayXd mean_path;     // ensemble average of F_s
  Eigen::ArrayXd mean_integrand;
};

// Evaluates the time-reversed (perturbed) Fisher information process along
// every recorded trajectory. Scores come from the bundle's snapshots; the
// independent-copy expectation is estimated by the ensemble at the same time
// slice, excluding the trajectory's own particle.
FisherPath fisher_process(const Bundle& bundle, const PotentialSpec<1>& V,
                          const InteractionSpec<1>& W,
                          const std::optional<PerturbationSpec<1>>& beta = std::nullopt);

struct ProbeStat {
  double s = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  double max_bin_tstat = 0.0;  // conditional-increment t over position bins
};

struct MartingaleReport {
  std::vector<ProbeStat> probes;
  double qv_ratio = 0.0;  // realized quadratic variation / 2 int E|grad log l|^2
};

// Residual M_s = (log l_s - log l_0) - F_s of the semimartingale
// decomposition; reports its ensemble mean, conditional-increment t
// statistics on position-quantile bins, and the quadratic-variation ratio.
MartingaleReport martingale_report(const Bundle& bundle, const FisherPath& path,
                                   const PotentialSpec<1>& V, const InteractionSpec<1>& W,
                                   const std::vector<double>& probe_fractions = {0.25, 0.5, 1.0},
                                   int bins = 10);

struct CompensatorCheck {
  std::vector<double> s;
  std::vector<double> mean_cumulative;   // ensemble mean of F_s
  std::vector<double> integrated_fisher; // int_0^s I(P_u | Q_u^up) du
  std::vector<double> std_error;
  double max_residual = 0.0;
};

// E[F_s] = int_0^s I(P_u | Q_u^up) du, the compensator identity.
CompensatorCheck compensator_expectation_check(const Bundle& bundle, const FisherPath& path,
                                               const PotentialSpec<1>& V,
                                               const InteractionSpec<1>& W,
                                               const std::vector<double>& probe_fractions = {
                                                   0.25, 0.5, 1.0});

// I(P|Q^up) of a snapshot law: closed form for Gaussian laws under quadratic
// potentials, grid quadrature otherwise.
double snapshot_fisher_information(const LawSnapshot& snap, const PotentialSpec<1>& V,
                                   const InteractionSpec<1>& W);

}  // namespace mkv
