#include "mkvflow/potentials.hpp"

#include <cmath>

#include "mkvflow/measures.hpp"
#include "mkvflow/rng.hpp"

namespace mkv {
namespace {

template <int Dim>
Point<Dim> uniform_point(std::uint64_t seed, std::uint64_t idx, double box) {
  if constexpr (Dim == 1) {
    return box * (2.0 * rng::uniform(seed, idx, 0, rng::Purpose::suite) - 1.0);
  } else {
    Point<Dim> p;
    for (int d = 0; d < Dim; ++d) {
      p(d) = box * (2.0 * rng::uniform(seed, idx, static_cast<std::uint64_t>(d),
                                       rng::Purpose::suite) -
                    1.0);
    }
    return p;
  }
}

template <int Dim>
Point<Dim> axis_offset(int axis, double h) {
  if constexpr (Dim == 1) {
    (void)axis;
    return h;
  } else {
    Point<Dim> p = Point<Dim>::Zero();
    p(axis) = h;
    return p;
  }
}

inline double component(double p, int) { return p; }
template <typename Derived>
double component(const Eigen::MatrixBase<Derived>& p, int axis) {
  return p(axis);
}

template <int Dim, typename F, typename G>
void check_gradient_fd(const F& value, const G& gradient, const Point<Dim>& x, double h,
                       double tol, ValidationReport& report) {
  for (int d = 0; d < Dim; ++d) {
    const auto dx = axis_offset<Dim>(d, h);
    const double fd = (value(x + dx) - value(x - dx)) / (2.0 * h);
    const double an = component(gradient(x), d);
    const double scale = std::max({std::abs(an), std::abs(fd), 1.0});
    if (std::abs(fd - an) > tol * scale) {
      report.ok = false;
      report.failures.push_back("gradient/finite-difference mismatch: fd=" + std::to_string(fd) +
                                " analytic=" + std::to_string(an));
      return;
    }
  }
}

template <int Dim, typename F, typename L>
void check_laplacian_fd(const F& value, const L& laplacian, const Point<Dim>& x, double h,
                        double tol, ValidationReport& report) {
  double fd = 0.0;
  for (int d = 0; d < Dim; ++d) {
    const auto dx = axis_offset<Dim>(d, h);
    fd += (value(x + dx) - 2.0 * value(x) + value(x - dx)) / (h * h);
  }
  const double an = laplacian(x);
  const double scale = std::max({std::abs(an), std::abs(fd), 1.0});
  if (std::abs(fd - an) > tol * scale) {
    report.ok = false;
    report.failures.push_back("laplacian/finite-difference mismatch: fd=" + std::to_string(fd) +
                              " analytic=" + std::to_string(an));
  }
}

// exp(-|x-c|^2 / (2 w^2)) and derivatives, any dimension.
template <int Dim>
struct RadialBump {
  Point<Dim> center;
  double width;
  double envelope(const Point<Dim>& x) const {
    return std::exp(-squared_norm(x - center) / (2.0 * width * width));
  }
  double value(const Point<Dim>& x, double amp) const { return amp * envelope(x); }
  Point<Dim> gradient(const Point<Dim>& x, double amp) const {
    if constexpr (Dim == 1) {
      return -amp * envelope(x) * (x - center) / (width * width);
    } else {
      return (-amp * envelope(x) / (width * width)) * (x - center);
    }
  }
  double laplacian(const Point<Dim>& x, double amp) const {
    const double w2 = width * width;
    return amp * envelope(x) * (squared_norm(x - center) / (w2 * w2) - Dim / w2);
  }
};

double horner(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
  return v;
}

std::vector<double> poly_derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t k = 1; k < c.size(); ++k) d.push_back(static_cast<double>(k) * c[k]);
  return d;
}

}  // namespace

template <int Dim>
PotentialSpec<Dim> zero_potential() {
  PotentialSpec<Dim> spec;
  spec.value = [](const Point<Dim>&) { return 0.0; };
  spec.gradient = [](const Point<Dim>&) { return zero_point<Dim>(); };
  spec.laplacian = [](const Point<Dim>&) { return 0.0; };
  spec.is_zero = true;
  spec.is_quadratic = true;
  spec.quad_coeff = 0.0;
  spec.name = "zero";
  return spec;
}

template <int Dim>
PotentialSpec<Dim> quadratic_potential(double a) {
  if (a < 0) throw ConfigError("quadratic potential coefficient must be >= 0");
  PotentialSpec<Dim> spec;
  spec.value = [a](const Point<Dim>& x) { return 0.5 * a * squared_norm(x); };
  spec.gradient = [a](const Point<Dim>& x) -> Point<Dim> {
    if constexpr (Dim == 1) {
      return a * x;
    } else {
      return (a * x).eval();
    }
  };
  spec.laplacian = [a](const Point<Dim>&) { return a * Dim; };
  spec.grad_lipschitz = a;
  spec.linear_growth_const = a;
  spec.convexity_modulus = a;
  spec.is_quadratic = true;
  spec.quad_coeff = a;
  spec.is_zero = (a == 0.0);
  spec.name = "quadratic";
  return spec;
}

template <int Dim>
PotentialSpec<Dim> quadratic_bump_potential(double a, double amp, const Point<Dim>& center,
                                            double width) {
  if (width <= 0) throw ConfigError("bump width must be positive");
  RadialBump<Dim> bump{center, width};
  PotentialSpec<Dim> spec;
  spec.value = [a, amp, bump](const Point<Dim>& x) {
    return 0.5 * a * squared_norm(x) + bump.value(x, amp);
  };
  spec.gradient = [a, amp, bump](const Point<Dim>& x) -> Point<Dim> {
    if constexpr (Dim == 1) {
      return a * x + bump.gradient(x, amp);
    } else {
      return (a * x + bump.gradient(x, amp)).eval();
    }
  };
  spec.laplacian = [a, amp, bump](const Point<Dim>& x) {
    return a * Dim + bump.laplacian(x, amp);
  };
  const double w2 = width * width;
  spec.grad_lipschitz = a + std::abs(amp) / w2;
  spec.linear_growth_const = std::max(a, std::abs(amp) * std::exp(-0.5) / width);
  spec.convexity_modulus = a - std::abs(amp) / w2;
  spec.name = "quadratic_bump";
  return spec;
}

PotentialSpec<1> polynomial_bump_potential(std::vector<double> coeffs, double amp, double center,
                                           double width, double box) {
  if (width <= 0) throw ConfigError("bump width must be positive");
  const auto d1 = poly_derivative(coeffs);
  const auto d2 = poly_derivative(d1);
  RadialBump<1> bump{center, width};
  PotentialSpec<1> spec;
  spec.value = [coeffs, amp, bump](const double& x) { return horner(coeffs, x) + bump.value(x, amp); };
  spec.gradient = [d1, amp, bump](const double& x) { return horner(d1, x) + bump.gradient(x, amp); };
  spec.laplacian = [d2, amp, bump](const double& x) { return horner(d2, x) + bump.laplacian(x, amp); };
  // Constants estimated on [-box, box]; polynomials of degree > 2 have no
  // global linear-growth constant.
  const int n = 20001;
  double growth = 0.0, lip = 0.0, kappa = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double x = -box + 2.0 * box * i / (n - 1);
    growth = std::max(growth, std::abs(spec.gradient(x)) / (1.0 + std::abs(x)));
    const double second = spec.laplacian(x);
    lip = std::max(lip, std::abs(second));
    kappa = std::min(kappa, second);
  }
  spec.linear_growth_const = growth;
  spec.grad_lipschitz = lip;
  spec.convexity_modulus = kappa;
  spec.name = "polynomial_bump";
  return spec;
}

template <int Dim>
InteractionSpec<Dim> zero_interaction() {
  InteractionSpec<Dim> spec;
  static_cast<PotentialSpec<Dim>&>(spec) = zero_potential<Dim>();
  spec.name = "zero";
  return spec;
}

template <int Dim>
InteractionSpec<Dim> quadratic_interaction(double a) {
  InteractionSpec<Dim> spec;
  static_cast<PotentialSpec<Dim>&>(spec) = quadratic_potential<Dim>(a);
  return spec;
}

template <int Dim>
InteractionSpec<Dim> quadratic_bump_interaction(double a, double amp, double width) {
  InteractionSpec<Dim> spec;
  static_cast<PotentialSpec<Dim>&>(spec) =
      quadratic_bump_potential<Dim>(a, amp, zero_point<Dim>(), width);
  return spec;
}

PerturbationSpec<1> zero_perturbation() {
  PerturbationSpec<1> spec;
  spec.value = [](const double&) { return 0.0; };
  spec.gradient = [](const double&) { return 0.0; };
  spec.laplacian = [](const double&) { return 0.0; };
  spec.support_radius = 0.0;
  spec.is_zero = true;
  spec.name = "none";
  return spec;
}

PerturbationSpec<1> bump_perturbation(double amp, double center, double width) {
  if (width <= 0) throw ConfigError("bump width must be positive");
  // phi(u) = exp(-1/(1-u^2)) on |u| < 1, extended by zero: smooth with
  // compact support [center - width, center + width].
  const auto phi = [](double u, double& p0, double& p1, double& p2) {
    const double q = 1.0 - u * u;
    if (q <= 1e-12) {
      p0 = p1 = p2 = 0.0;
      return;
    }
    const double e = std::exp(-1.0 / q);
    p0 = e;
    p1 = e * (-2.0 * u / (q * q));
    p2 = e * (4.0 * u * u / (q * q * q * q) - 2.0 / (q * q) - 8.0 * u * u / (q * q * q));
  };
  PerturbationSpec<1> spec;
  spec.value = [amp, center, width, phi](const double& x) {
    double p0, p1, p2;
    phi((x - center) / width, p0, p1, p2);
    return amp * p0;
  };
  spec.gradient = [amp, center, width, phi](const double& x) {
    double p0, p1, p2;
    phi((x - center) / width, p0, p1, p2);
    return amp * p1 / width;
  };
  spec.laplacian = [amp, center, width, phi](const double& x) {
    double p0, p1, p2;
    phi((x - center) / width, p0, p1, p2);
    return amp * p2 / (width * width);
  };
  spec.support_radius = std::abs(center) + width;
  spec.is_zero = (amp == 0.0);
  spec.name = "bump";
  return spec;
}

template <int Dim>
ValidationReport validate(const PotentialSpec<Dim>& spec, double box, int samples,
                          std::uint64_t seed) {
  ValidationReport report;
  const double slack = 1.0 + 1e-9;
  for (int i = 0; i < samples && report.ok; ++i) {
    const auto x = uniform_point<Dim>(seed, static_cast<std::uint64_t>(2 * i), box);
    const auto y = uniform_point<Dim>(seed, static_cast<std::uint64_t>(2 * i + 1), box);
    if (spec.value(x) < 0.0) {
      report.ok = false;
      report.failures.push_back("negative potential value");
      break;
    }
    if (norm(spec.gradient(x)) > slack * spec.linear_growth_const * (1.0 + norm(x))) {
      report.ok = false;
      report.failures.push_back("linear growth bound violated");
      break;
    }
    if constexpr (Dim == 1) {
      if (std::abs(spec.gradient(x) - spec.gradient(y)) >
          slack * spec.grad_lipschitz * std::abs(x - y)) {
        report.ok = false;
        report.failures.push_back("gradient Lipschitz bound violated");
        break;
      }
    } else {
      if ((spec.gradient(x) - spec.gradient(y)).norm() >
          slack * spec.grad_lipschitz * (x - y).norm()) {
        report.ok = false;
        report.failures.push_back("gradient Lipschitz bound violated");
        break;
      }
    }
  }
  const int fd_samples = std::min(samples, 1000);
  for (int i = 0; i < fd_samples && report.ok; ++i) {
    const auto x = uniform_point<Dim>(seed + 1, static_cast<std::uint64_t>(i), box);
    check_gradient_fd<Dim>(spec.value, spec.gradient, x, 1e-5, 1e-6, report);
    check_laplacian_fd<Dim>(spec.value, spec.laplacian, x, 1e-4, 1e-4, report);
  }
  return report;
}

template <int Dim>
ValidationReport validate(const InteractionSpec<Dim>& spec, double box, int samples,
                          std::uint64_t seed) {
  ValidationReport report = validate(static_cast<const PotentialSpec<Dim>&>(spec), box, samples, seed);
  for (int i = 0; i < samples && report.ok; ++i) {
    const auto x = uniform_point<Dim>(seed + 2, static_cast<std::uint64_t>(i), box);
    if (std::abs(spec.value(x) - spec.value(-x)) > 1e-12 * (1.0 + std::abs(spec.value(x)))) {
      report.ok = false;
      report.failures.push_back("interaction potential is not even");
      break;
    }
    if (norm(spec.gradient(x) + spec.gradient(-x)) > 1e-12 * (1.0 + norm(spec.gradient(x)))) {
      report.ok = false;
      report.failures.push_back("interaction gradient is not odd");
      break;
    }
  }
  return report;
}

ValidationReport validate(const PerturbationSpec<1>& spec, double box, int samples,
                          std::uint64_t seed) {
  ValidationReport report;
  for (int i = 0; i < samples && report.ok; ++i) {
    const double x = uniform_point<1>(seed + 3, static_cast<std::uint64_t>(i), 2.0 * box);
    if (std::abs(x) > spec.support_radius &&
        (spec.value(x) != 0.0 || spec.gradient(x) != 0.0)) {
      report.ok = false;
      report.failures.push_back("perturbation does not vanish outside its support");
      break;
    }
  }
  const int fd_samples = std::min(samples, 1000);
  for (int i = 0; i < fd_samples && report.ok; ++i) {
    const double x =
        uniform_point<1>(seed + 4, static_cast<std::uint64_t>(i), 0.95 * spec.support_radius);
    check_gradient_fd<1>(spec.value, spec.gradient, x, 1e-5, 1e-6, report);
    check_laplacian_fd<1>(spec.value, spec.laplacian, x, 1e-4, 1e-4, report);
  }
  return report;
}

template <int Dim>
Point<Dim> convolve_gradient(const InteractionSpec<Dim>& W, const ParticleEnsemble<Dim>& mu,
                             const Point<Dim>& x) {
  if (mu.size() == 0) throw InvalidMeasureError("convolve_gradient: empty ensemble");
  if (!is_finite_point(x)) throw InvalidMeasureError("convolve_gradient: non-finite point");
  if (W.is_zero) return zero_point<Dim>();
  Point<Dim> acc = zero_point<Dim>();
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if constexpr (Dim == 1) {
      acc += W.gradient(x - mu.point(i));
    } else {
      acc += W.gradient((x - mu.point(i)).eval());
    }
  }
  if constexpr (Dim == 1) {
    return acc / static_cast<double>(mu.size());
  } else {
    return (acc / static_cast<double>(mu.size())).eval();
  }
}

double convolve_gradient(const InteractionSpec<1>& W, const GridDensity& mu, double x) {
  if (mu.cells() == 0) throw InvalidMeasureError("convolve_gradient: empty grid");
  if (W.is_zero) return 0.0;
  if (W.is_quadratic) {
    // grad(W*mu)(x) = a (x - mean)
    return W.quad_coeff * (x - barycenter(mu));
  }
  double acc = 0.0;
  const double dx = mu.dx();
  for (Eigen::Index i = 0; i < mu.cells(); ++i) {
    acc += W.gradient(x - mu.midpoint(i)) * mu.cell(i);
  }
  return acc * dx;
}

template <int Dim>
double convolve_value(const InteractionSpec<Dim>& W, const ParticleEnsemble<Dim>& mu,
                      const Point<Dim>& x) {
  if (mu.size() == 0) throw InvalidMeasureError("convolve_value: empty ensemble");
  if (W.is_zero) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if constexpr (Dim == 1) {
      acc += W.value(x - mu.point(i));
    } else {
      acc += W.value((x - mu.point(i)).eval());
    }
  }
  return acc / static_cast<double>(mu.size());
}

double convolve_value(const InteractionSpec<1>& W, const GridDensity& mu, double x) {
  if (mu.cells() == 0) throw InvalidMeasureError("convolve_value: empty grid");
  if (W.is_zero) return 0.0;
  if (W.is_quadratic) {
    // (W*mu)(x) = a/2 (x^2 - 2 m1 x + m2)
    const double m1 = barycenter(mu);
    const double m2 = second_moment(mu);
    return 0.5 * W.quad_coeff * (x * x - 2.0 * m1 * x + m2);
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.cells(); ++i) {
    acc += W.value(x - mu.midpoint(i)) * mu.cell(i);
  }
  return acc * mu.dx();
}

template PotentialSpec<1> zero_potential<1>();
template PotentialSpec<2> zero_potential<2>();
template PotentialSpec<1> quadratic_potential<1>(double);
template PotentialSpec<2> quadratic_potential<2>(double);
template PotentialSpec<1> quadratic_bump_potential<1>(double, double, const Point<1>&, double);
template PotentialSpec<2> quadratic_bump_potential<2>(double, double, const Point<2>&, double);
template InteractionSpec<1> zero_interaction<1>();
template InteractionSpec<2> zero_interaction<2>();
template InteractionSpec<1> quadratic_interaction<1>(double);
template InteractionSpec<2> quadratic_interaction<2>(double);
template InteractionSpec<1> quadratic_bump_interaction<1>(double, double, double);
template InteractionSpec<2> quadratic_bump_interaction<2>(double, double, double);
template ValidationReport validate<1>(const PotentialSpec<1>&, double, int, std::uint64_t);
template ValidationReport validate<2>(const PotentialSpec<2>&, double, int, std::uint64_t);
template ValidationReport validate<1>(const InteractionSpec<1>&, double, int, std::uint64_t);
template ValidationReport validate<2>(const InteractionSpec<2>&, double, int, std::uint64_t);
template Point<1> convolve_gradient<1>(const InteractionSpec<1>&, const ParticleEnsemble<1>&,
                                       const Point<1>&);
template Point<2> convolve_gradient<2>(const InteractionSpec<2>&, const ParticleEnsemble<2>&,
                                       const Point<2>&);
template double convolve_value<1>(const InteractionSpec<1>&, const ParticleEnsemble<1>&,
                                  const Point<1>&);
template double convolve_value<2>(const InteractionSpec<2>&, const ParticleEnsemble<2>&,
                                  const Point<2>&);

}  // namespace mkv
