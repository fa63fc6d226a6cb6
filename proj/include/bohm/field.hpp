#pragma once

#include "bohm/core.hpp"

#include <functional>
#include <type_traits>

namespace bohm {

/// Central finite-difference stencil. First derivatives use
/// (f(x+h) - f(x-h)) / 2h; second derivatives use the symmetric
/// four-point mixed stencil, so the Hessian is symmetric by construction.
struct DerivativeStencil {
  int order = 1;
  double step = 1e-5;

  static DerivativeStencil first() { return {1, 1e-5}; }
  static DerivativeStencil second() { return {2, 1e-4}; }
};

template <class F>
auto central_difference(const F& f, const Point& x, Eigen::Index dir, double h)
    -> std::decay_t<decltype(f(x))> {
  Point xp = x, xm = x;
  xp(dir) += h;
  xm(dir) -= h;
  return (f(xp) - f(xm)) / (2.0 * h);
}

template <class T, class F>
Eigen::Matrix<T, Eigen::Dynamic, 1> fd_gradient(const F& f, const Point& x, double h) {
  Eigen::Matrix<T, Eigen::Dynamic, 1> g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) g(i) = central_difference(f, x, i, h);
  return g;
}

template <class T, class F>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> fd_hessian(const F& f, const Point& x, double h) {
  const Eigen::Index n = x.size();
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> H(n, n);
  const T f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    Point xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h * h);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Point a = x, b = x, c = x, d = x;
      a(i) += h; a(j) += h;
      b(i) += h; b(j) -= h;
      c(i) -= h; c(j) += h;
      d(i) -= h; d(j) -= h;
      H(i, j) = (f(a) - f(b) - f(c) + f(d)) / (4.0 * h * h);
      H(j, i) = H(i, j);
    }
  }
  return H;
}

/// A scalar field on spacetime with optional analytic first and second
/// derivatives. Missing derivatives fall back to central differences.
template <class T>
struct Field {
  using Gradient = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using Hessian = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  std::function<T(const Point&)> value;
  std::function<Gradient(const Point&)> gradient;
  std::function<Hessian(const Point&)> hessian;
  double first_step = DerivativeStencil::first().step;
  double second_step = DerivativeStencil::second().step;

  T operator()(const Point& x) const { return value(x); }

  Gradient grad(const Point& x) const {
    if (gradient) return gradient(x);
    return fd_gradient<T>(value, x, first_step);
  }

  Hessian hess(const Point& x) const {
    if (hessian) return hessian(x);
    if (gradient) {
      // Differentiate the analytic gradient once; symmetrise.
      const Eigen::Index n = x.size();
      Hessian H(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        H.col(i) = central_difference(gradient, x, i, first_step);
      return (0.5 * (H + H.transpose())).eval();
    }
    return fd_hessian<T>(value, x, second_step);
  }

  bool has_analytic_gradient() const { return static_cast<bool>(gradient); }
  bool has_analytic_hessian() const { return static_cast<bool>(hessian); }
};

using RealField = Field<double>;
using ComplexField = Field<Complex>;

/// Polar form psi = sqrt(rho) exp(iS) of a wave function.
struct PolarField {
  RealField rho;
  RealField S;
};

inline RealField constant_field(Eigen::Index dim, double c) {
  RealField f;
  f.value = [c](const Point&) { return c; };
  f.gradient = [dim](const Point&) { return Vec::Zero(dim).eval(); };
  f.hessian = [dim](const Point&) { return Mat::Zero(dim, dim).eval(); };
  return f;
}

}  // namespace bohm
