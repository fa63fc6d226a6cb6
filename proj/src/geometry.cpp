#include "bohm/geometry.hpp"

#include <cmath>
#include <string>

namespace bohm {

BackgroundRel minkowski(int dim, double mass, double charge) {
  BackgroundRel bg;
  bg.dim = dim;
  bg.mass = mass;
  bg.charge = charge;
  bg.metric = [dim](const Point&) {
    Mat g = Mat::Identity(dim, dim);
    g(0, 0) = -1.0;
    return g;
  };
  bg.metric_derivative = [dim](const Point&, int) { return Mat::Zero(dim, dim).eval(); };
  return bg;
}

void validate_metric(const Mat& g) {
  if (g.rows() != g.cols() || g.rows() < 2)
    throw SignatureViolation("metric must be square with D >= 2");
  if ((g - g.transpose()).cwiseAbs().maxCoeff() >= 1e-12)
    throw SignatureViolation("metric is not symmetric");
  const double det = g.determinant();
  if (std::abs(det) < 1e-14) throw SingularMetric("|det g| = " + std::to_string(std::abs(det)));
  Eigen::SelfAdjointEigenSolver<Mat> eig(g, Eigen::EigenvaluesOnly);
  const auto negatives = (eig.eigenvalues().array() < 0.0).count();
  if (negatives != 1)
    throw SignatureViolation(std::to_string(negatives) + " negative eigenvalues, expected 1");
}

Mat metric_inverse(const BackgroundRel& bg, const Point& x) {
  const Mat g = bg.metric(x);
  validate_metric(g);
  Mat inv = g.partialPivLu().inverse();
  return 0.5 * (inv + inv.transpose());
}

double volume_element(const BackgroundRel& bg, const Point& x) {
  const double det = bg.metric(x).determinant();
  if (!(det < 0.0)) throw SignatureViolation("det g = " + std::to_string(det) + " is not negative");
  return std::sqrt(-det);
}

Mat metric_derivative(const BackgroundRel& bg, const Point& x, int direction) {
  if (bg.metric_derivative) return bg.metric_derivative(x, direction);
  return central_difference(bg.metric, x, direction, bg.fd_step);
}

Covector gauge_field(const BackgroundRel& bg, const Point& x) {
  if (!bg.gauge) return Covector::Zero(bg.dim);
  return bg.gauge(x);
}

Mat gauge_jacobian(const BackgroundRel& bg, const Point& x) {
  if (!bg.gauge) return Mat::Zero(bg.dim, bg.dim);
  if (bg.gauge_jacobian) return bg.gauge_jacobian(x);
  Mat J(bg.dim, bg.dim);
  for (int m = 0; m < bg.dim; ++m) J.row(m) = central_difference(bg.gauge, x, m, bg.fd_step).transpose();
  return J;
}

MetricData metric_data(const BackgroundRel& bg, const Point& x) {
  MetricData d;
  d.g = bg.metric(x);
  validate_metric(d.g);
  d.g_inv = d.g.partialPivLu().inverse();
  d.g_inv = 0.5 * (d.g_inv + d.g_inv.transpose());
  d.sqrt_minus_g = std::sqrt(-d.g.determinant());
  d.div_densitized = Vec::Zero(bg.dim);
  // d_M (sqrt(-g) g^{MN}) = sqrt(-g) [ 1/2 tr(g^-1 d_M g) g^{MN} - (g^-1 d_M g g^-1)^{MN} ]
  for (int m = 0; m < bg.dim; ++m) {
    const Mat dg = metric_derivative(bg, x, m);
    const Mat a = d.g_inv * dg;
    const double half_trace = 0.5 * a.trace();
    const Mat dinv = a * d.g_inv;
    for (int n = 0; n < bg.dim; ++n)
      d.div_densitized(n) += d.sqrt_minus_g * (half_trace * d.g_inv(m, n) - dinv(m, n));
  }
  return d;
}

}  // namespace bohm
