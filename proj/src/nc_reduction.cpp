#include "bohm/nc_reduction.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bohm {

NCBackground flat_nc(int dim, double mass, double charge) {
  NCBackground bg;
  bg.dim = dim;
  bg.mass = mass;
  bg.charge = charge;
  bg.tau = [dim](const Point&) { return unit_vector(dim, 0); };
  bg.vierbein = [dim](const Point&) {
    Mat e = Mat::Zero(dim, dim - 1);
    e.bottomRows(dim - 1).setIdentity();
    return e;
  };
  return bg;
}

NCDerived derive_nc(const NCBackground& bg, const Point& x) {
  const int D = bg.dim;
  NCDerived d;
  d.tau = bg.tau(x);
  d.e = bg.vierbein(x);
  d.M = bg.mass_gauge ? bg.mass_gauge(x) : Covector::Zero(D);
  d.gauge_bar = bg.gauge_bar ? bg.gauge_bar(x) : Covector::Zero(D);
  d.phi = bg.phi_gauge ? bg.phi_gauge(x) : 0.0;

  // Rows of F are tau and e^a; F^{-1} has columns (-v, e_1, ..., e_{D-1}).
  Mat F(D, D);
  F.row(0) = d.tau.transpose();
  F.bottomRows(D - 1) = d.e.transpose();
  const double det = F.determinant();
  if (!(std::abs(det) >= 1e-12)) throw DegenerateFrame("det(tau, e) = " + std::to_string(det));
  const Mat Finv = F.partialPivLu().solve(Mat::Identity(D, D));

  d.v = -Finv.col(0);
  d.e_inv = Finv.rightCols(D - 1).transpose();
  d.vol = std::abs(det);
  d.h_down = d.e * d.e.transpose();
  d.h_down = 0.5 * (d.h_down + d.h_down.transpose()).eval();
  d.h_up = d.e_inv.transpose() * d.e_inv;
  d.h_up = 0.5 * (d.h_up + d.h_up.transpose()).eval();
  const Mat tM = d.tau * d.M.transpose();
  d.hbar_down = d.h_down - tM - tM.transpose();
  d.hbar_down = 0.5 * (d.hbar_down + d.hbar_down.transpose()).eval();
  d.v_hat = d.v - d.h_up * d.M;
  d.e_hat = d.e - d.tau * (d.e_inv * d.M).transpose();
  d.Phi = -d.v.dot(d.M) + 0.5 * d.M.dot(d.h_up * d.M);
  d.gauge = d.gauge_bar - d.phi * d.M;
  return d;
}

double FrameIdentityResiduals::max() const {
  return std::max({v_tau, v_e, tau_einv, einv_e, h_tau});
}

FrameIdentityResiduals frame_identity_residuals(const NCDerived& d) {
  FrameIdentityResiduals r;
  const auto n = d.e.cols();
  r.v_tau = std::abs(d.v.dot(d.tau) + 1.0);
  r.v_e = (d.e.transpose() * d.v).cwiseAbs().maxCoeff();
  r.tau_einv = (d.e_inv * d.tau).cwiseAbs().maxCoeff();
  r.einv_e = (d.e_inv * d.e - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
  r.h_tau = (d.h_up * d.tau).cwiseAbs().maxCoeff();
  return r;
}

NullLift null_lift(const NCBackground& bg, const Point& x) {
  const NCDerived d = derive_nc(bg, x);
  const int D = bg.dim;
  NullLift lift;
  lift.gamma = Mat::Zero(D + 1, D + 1);
  lift.gamma.topLeftCorner(D, D) = d.hbar_down;
  lift.gamma.block(0, D, D, 1) = d.tau;
  lift.gamma.block(D, 0, 1, D) = d.tau.transpose();

  lift.gamma_inv = Mat::Zero(D + 1, D + 1);
  lift.gamma_inv.topLeftCorner(D, D) = d.h_up;
  lift.gamma_inv.block(0, D, D, 1) = -d.v_hat;
  lift.gamma_inv.block(D, 0, 1, D) = -d.v_hat.transpose();
  lift.gamma_inv(D, D) = 2.0 * d.Phi;

  lift.gauge_lift = Covector(D + 1);
  lift.gauge_lift.head(D) = d.gauge;
  lift.gauge_lift(D) = d.phi;
  lift.vol = d.vol;
  return lift;
}

ResidualReport ehat_identity_check(const NCBackground& bg, const Point& x) {
  const NCDerived d = derive_nc(bg, x);
  const Mat lhs = d.e_hat * d.e_hat.transpose();
  const Mat rhs = d.hbar_down + 2.0 * d.Phi * d.tau * d.tau.transpose();
  ResidualReport r("ehat_identity");
  r.add(x, (lhs - rhs).cwiseAbs().maxCoeff());
  return r;
}

BackgroundRel lifted_background(const NCBackground& bg, double lifted_mass) {
  BackgroundRel rel;
  const int D = bg.dim;
  rel.dim = D + 1;
  rel.mass = lifted_mass;
  rel.charge = bg.charge;
  rel.fd_step = bg.fd_step;
  rel.metric = [bg, D](const Point& X) { return null_lift(bg, X.head(D)).gamma; };
  rel.gauge = [bg, D](const Point& X) { return null_lift(bg, X.head(D)).gauge_lift; };
  return rel;
}

NCGradients nc_gradients(const NCBackground& bg, const Point& x) {
  const int D = bg.dim;
  const double h = bg.fd_step;
  NCGradients g;
  g.div_e_h = Vec::Zero(D);
  g.gauge_jacobian = Mat::Zero(D, D);
  for (int mu = 0; mu < D; ++mu) {
    Point xp = x, xm = x;
    xp(mu) += h;
    xm(mu) -= h;
    const NCDerived p = derive_nc(bg, xp);
    const NCDerived m = derive_nc(bg, xm);
    const double cp = bg.mass - bg.charge * p.phi;
    const double cm = bg.mass - bg.charge * m.phi;
    g.div_e_c_vhat += (p.vol * cp * p.v_hat(mu) - m.vol * cm * m.v_hat(mu)) / (2.0 * h);
    g.div_e_h += (p.vol * p.h_up.row(mu).transpose() - m.vol * m.h_up.row(mu).transpose()) / (2.0 * h);
    g.gauge_jacobian.row(mu) = ((p.gauge - m.gauge) / (2.0 * h)).transpose();
  }
  return g;
}

}  // namespace bohm
