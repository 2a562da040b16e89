#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mkvflow/common.hpp"

namespace mkv {

template <int Dim>
struct ParticleEnsemble;
struct GridDensity;

// Confinement potential V >= 0 with analytically coded derivatives. The
// catalog constructors below fill in the growth/Lipschitz/convexity
// constants; the invariants they are supposed to satisfy are sampled by
// validate(), not proven.
template <int Dim = 1>
struct PotentialSpec {
  using Vec = Point<Dim>;

  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<double(const Vec&)> laplacian;

  double grad_lipschitz = 0.0;
  double linear_growth_const = 0.0;
  double convexity_modulus = 0.0;  // kappa_V: Hess(V) >= kappa_V I

  // V(x) = 0.5 * quad_coeff * |x|^2 exactly; enables O(N) / O(M) mean-field
  // shortcuts in the simulator and the PDE solver.
  bool is_quadratic = false;
  double quad_coeff = 0.0;
  bool is_zero = false;

  std::string name = "custom";
};

// Interaction potential W; assumed even (W(x) = W(-x)). kappa_W lives in
// convexity_modulus of the base.
template <int Dim = 1>
struct InteractionSpec : PotentialSpec<Dim> {
  bool even = true;
};

// Compactly supported smooth perturbation beta. value and gradient vanish
// for |x| > support_radius.
template <int Dim = 1>
struct PerturbationSpec {
  using Vec = Point<Dim>;

  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<double(const Vec&)> laplacian;
  double support_radius = 0.0;
  bool is_zero = true;
  std::string name = "none";
};

// ---- catalog ----

template <int Dim = 1>
PotentialSpec<Dim> zero_potential();

// 0.5 * a * |x|^2
template <int Dim = 1>
PotentialSpec<Dim> quadratic_potential(double a);

// 0.5 * a * |x|^2 + amp * exp(-|x - c|^2 / (2 w^2)), radial bump at c
template <int Dim = 1>
PotentialSpec<Dim> quadratic_bump_potential(double a, double amp, const Point<Dim>& center,
                                            double width);

// sum_k coeffs[k] x^k + amp * exp(-(x-c)^2/(2w^2)), 1-D only; growth and
// Lipschitz constants are estimated by sampling on [-box, box].
PotentialSpec<1> polynomial_bump_potential(std::vector<double> coeffs, double amp, double center,
                                           double width, double box = 10.0);

template <int Dim = 1>
InteractionSpec<Dim> zero_interaction();

template <int Dim = 1>
InteractionSpec<Dim> quadratic_interaction(double a);

template <int Dim = 1>
InteractionSpec<Dim> quadratic_bump_interaction(double a, double amp, double width);

PerturbationSpec<1> zero_perturbation();

// amp * exp(-1 / (1 - u^2)) with u = (x - center)/width on |u| < 1, zero
// outside: smooth and compactly supported on [center - width, center + width].
PerturbationSpec<1> bump_perturbation(double amp, double center, double width);

// ---- sampled invariant checks ----

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> failures;
};

template <int Dim = 1>
ValidationReport validate(const PotentialSpec<Dim>& spec, double box = 5.0, int samples = 10000,
                          std::uint64_t seed = 7);
template <int Dim = 1>
ValidationReport validate(const InteractionSpec<Dim>& spec, double box = 5.0, int samples = 10000,
                          std::uint64_t seed = 7);
ValidationReport validate(const PerturbationSpec<1>& spec, double box = 5.0, int samples = 10000,
                          std::uint64_t seed = 7);

// ---- mean-field evaluations ----

// grad(W * mu)(x): exact sum over particles / midpoint quadrature over cells.
template <int Dim>
Point<Dim> convolve_gradient(const InteractionSpec<Dim>& W, const ParticleEnsemble<Dim>& mu,
                             const Point<Dim>& x);
double convolve_gradient(const InteractionSpec<1>& W, const GridDensity& mu, double x);

// (W * mu)(x)
template <int Dim>
double convolve_value(const InteractionSpec<Dim>& W, const ParticleEnsemble<Dim>& mu,
                      const Point<Dim>& x);
double convolve_value(const InteractionSpec<1>& W, const GridDensity& mu, double x);

enum class PotentialVariant { half, full, conf_only };
enum class GibbsVariant { q, q_up, q_down };

// Psi = V + (W*mu)/2, Psi_up = V + W*mu, or plain V.
template <int Dim, typename Measure>
double generalized_potential(const PotentialSpec<Dim>& V, const InteractionSpec<Dim>& W,
                             const Point<Dim>& x, const Measure& mu, PotentialVariant variant) {
  switch (variant) {
    case PotentialVariant::conf_only:
      return V.value(x);
    case PotentialVariant::half:
      return V.value(x) + 0.5 * convolve_value(W, mu, x);
    case PotentialVariant::full:
      return V.value(x) + convolve_value(W, mu, x);
  }
  throw Error("unreachable");
}

// q = exp(-Psi), q_up = exp(-Psi_up), q_down = exp(-V).
template <int Dim, typename Measure>
double gibbs_density(const PotentialSpec<Dim>& V, const InteractionSpec<Dim>& W,
                     const Point<Dim>& x, const Measure& mu, GibbsVariant variant) {
  switch (variant) {
    case GibbsVariant::q:
      return std::exp(-generalized_potential(V, W, x, mu, PotentialVariant::half));
    case GibbsVariant::q_up:
      return std::exp(-generalized_potential(V, W, x, mu, PotentialVariant::full));
    case GibbsVariant::q_down:
      return std::exp(-V.value(x));
  }
  throw Error("unreachable");
}

}  // namespace mkv
