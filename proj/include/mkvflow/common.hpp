#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace mkv {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a measure argument is unusable (empty ensemble, bad mass, ...).
struct InvalidMeasureError : Error {
  using Error::Error;
};

// Thrown when a requested domain excludes too much mass or a point falls
// outside a grid.
struct CoverageError : Error {
  using Error::Error;
};

// Thrown when particles escape the safety box (dt too large for the drift).
struct DivergenceError : Error {
  using Error::Error;
};

// Thrown when an explicit PDE step violates its stability bound.
struct StabilityError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Points in R^n. Dim == 1 uses plain doubles so the (dominant) scalar code
// path stays free of 1x1 matrix noise; Dim == 2 uses fixed-size Eigen vectors.
template <int Dim>
struct PointTraits {
  using type = Eigen::Matrix<double, Dim, 1>;
};
template <>
struct PointTraits<1> {
  using type = double;
};
template <int Dim>
using Point = typename PointTraits<Dim>::type;

inline double dot(double a, double b) { return a * b; }
template <typename DerivedA, typename DerivedB>
double dot(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  return a.dot(b);
}

inline double squared_norm(double a) { return a * a; }
template <typename Derived>
double squared_norm(const Eigen::MatrixBase<Derived>& a) {
  return a.squaredNorm();
}

inline double norm(double a) { return std::abs(a); }
template <typename Derived>
double norm(const Eigen::MatrixBase<Derived>& a) {
  return a.norm();
}

template <int Dim>
Point<Dim> zero_point() {
  if constexpr (Dim == 1) {
    return 0.0;
  } else {
    return Point<Dim>::Zero();
  }
}

inline bool is_finite_point(double a) { return std::isfinite(a); }
template <typename Derived>
bool is_finite_point(const Eigen::MatrixBase<Derived>& a) {
  return a.allFinite();
}

}  // namespace mkv
