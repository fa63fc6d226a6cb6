#pragma once

#include "bohm/core.hpp"
#include "bohm/field.hpp"

#include <functional>

namespace bohm {

/// A D-dimensional Lorentzian background g_MN(x) with gauge field A_M(x)
/// for a particle of mass m and charge q. Signature is mostly plus.
///
/// Derivatives of g and A come from the analytic closures when present,
/// otherwise from central differences with step `fd_step`.
struct BackgroundRel {
  int dim = 4;
  std::function<Mat(const Point&)> metric;
  std::function<Covector(const Point&)> gauge;  // empty: A = 0
  double mass = 1.0;
  double charge = 0.0;

  // d_M g_{..} for a given direction M.
  std::function<Mat(const Point&, int)> metric_derivative;
  // J(M, N) = d_M A_N.
  std::function<Mat(const Point&)> gauge_jacobian;
  double fd_step = DerivativeStencil::first().step;
};

BackgroundRel minkowski(int dim, double mass = 1.0, double charge = 0.0);

/// Throws SignatureViolation unless g(x) is symmetric with exactly one
/// negative eigenvalue, and SingularMetric if |det g| < 1e-14.
void validate_metric(const Mat& g);

Mat metric_inverse(const BackgroundRel& bg, const Point& x);
double volume_element(const BackgroundRel& bg, const Point& x);
Mat metric_derivative(const BackgroundRel& bg, const Point& x, int direction);

Covector gauge_field(const BackgroundRel& bg, const Point& x);
Mat gauge_jacobian(const BackgroundRel& bg, const Point& x);

/// Everything the residual operators need at one point, evaluated once.
struct MetricData {
  Mat g;
  Mat g_inv;
  double sqrt_minus_g = 0.0;
  // div_densitized(N) = d_M (sqrt(-g) g^{MN}).
  Vec div_densitized;
};

MetricData metric_data(const BackgroundRel& bg, const Point& x);

}  // namespace bohm
