#pragma once

#include "bohm/core.hpp"
#include "bohm/field.hpp"
#include "bohm/geometry.hpp"
#include "bohm/report.hpp"

#include <functional>

namespace bohm {

/// Newton-Cartan data on a D-dimensional spacetime: clock form tau_mu,
/// spatial vierbein e_mu^a (D x (D-1)), mass gauge field M_mu, and the
/// gauge field split Abar_mu, phi of the null reduction. All data is
/// u-independent; providers never see the null coordinate.
struct NCBackground {
  int dim = 2;
  std::function<Covector(const Point&)> tau;
  std::function<Mat(const Point&)> vierbein;
  std::function<Covector(const Point&)> mass_gauge;  // empty: M = 0
  std::function<Covector(const Point&)> gauge_bar;   // empty: Abar = 0
  std::function<double(const Point&)> phi_gauge;     // empty: phi = 0
  double mass = 1.0;
  double charge = 0.0;
  double fd_step = DerivativeStencil::first().step;
};

/// Flat Galilean data: tau = dt, e = spatial identity, M = 0.
NCBackground flat_nc(int dim, double mass = 1.0, double charge = 0.0);

/// Objects derived from the frame (tau, e) and M at one point.
struct NCDerived {
  Covector tau;
  Mat e;          // e_mu^a, D x (D-1)
  Mat e_inv;      // e^mu_a, (D-1) x D, row a
  Vec v;          // v^mu
  Mat h_up;       // h^{mu nu}
  Mat h_down;     // h_{mu nu}
  Mat hbar_down;  // h_{mu nu} - tau_mu M_nu - tau_nu M_mu
  Covector M;
  Vec v_hat;      // v^mu - h^{mu nu} M_nu
  Mat e_hat;      // e_mu^a - M_nu e^nu_b delta^{ba} tau_mu
  double Phi = 0.0;
  double vol = 0.0;  // e = |det(tau_mu, e_mu^a)|
  double phi = 0.0;
  Covector gauge;    // reduced A_mu = Abar_mu - phi M_mu
  Covector gauge_bar;
};

/// Solves the frame system for (v, e^mu_a) and assembles the derived
/// objects. Throws DegenerateFrame if |det(tau, e)| < 1e-12.
NCDerived derive_nc(const NCBackground& bg, const Point& x);

/// Residuals of the defining frame identities at one point.
struct FrameIdentityResiduals {
  double v_tau = 0.0;    // |v.tau + 1|
  double v_e = 0.0;      // max |v^mu e_mu^a|
  double tau_einv = 0.0; // max |tau_mu e^mu_a|
  double einv_e = 0.0;   // max |e^mu_a e_mu^b - delta_a^b|
  double h_tau = 0.0;    // max |h^{mu nu} tau_nu|
  double max() const;
};

FrameIdentityResiduals frame_identity_residuals(const NCDerived& d);

/// (D+1)-dimensional metric with null isometry along u. Coordinates are
/// ordered (x^0, ..., x^{D-1}, u).
struct NullLift {
  Mat gamma;
  Mat gamma_inv;       // closed form: gamma^{uu} = 2 Phi, gamma^{u mu} = -vhat^mu, gamma^{mu nu} = h^{mu nu}
  Covector gauge_lift; // (Abar_mu - phi M_mu, phi)
  double vol = 0.0;
};

NullLift null_lift(const NCBackground& bg, const Point& x);

/// max |e_hat e_hat^T - (hbar + 2 Phi tau tau^T)| at one point.
ResidualReport ehat_identity_check(const NCBackground& bg, const Point& x);

/// The lifted (D+1)-dimensional relativistic background, for cross-checks
/// of the reduced equations. `lifted_mass` is the (D+1)-dimensional mass T.
BackgroundRel lifted_background(const NCBackground& bg, double lifted_mass = 0.0);

/// Divergence-type derivatives of the derived NC data at one point,
/// by central differences of derive_nc (exactly zero for constant data).
struct NCGradients {
  double div_e_c_vhat = 0.0;  // d_mu (e (m - q phi) vhat^mu)
  Vec div_e_h;                // d_mu (e h^{mu nu}), indexed by nu
  Mat gauge_jacobian;         // J(mu, nu) = d_mu A_nu of the reduced gauge field
};

NCGradients nc_gradients(const NCBackground& bg, const Point& x);

}  // namespace bohm
