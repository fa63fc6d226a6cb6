#pragma once

#include "bohm/core.hpp"
#include "bohm/field.hpp"
#include "bohm/geometry.hpp"
#include "bohm/nc_reduction.hpp"

namespace bohm {

// ---------------------------------------------------------------------------
// Polar decomposition psi = sqrt(rho) exp(iS)

struct PolarValue {
  double rho;
  double S;  // principal branch, (-pi, pi]
};

Complex polar_compose(const PolarField& f, const Point& x);

/// Throws NodeEncountered if |psi(x)| <= kNodeEpsilon.
PolarValue polar_decompose(const ComplexField& psi, const Point& x);

/// Field-level decomposition. Derivatives of rho and S are obtained exactly
/// from those of psi through the logarithmic derivative d ln(psi), so an
/// analytic psi yields an analytic polar pair. S values are principal-branch.
PolarField polar_field(const ComplexField& psi);

/// Field-level composition with derivatives propagated by the chain rule.
ComplexField complex_field(const PolarField& f);

/// Nearest-branch continuation of a phase sampled along a path.
class PhaseUnwrapper {
 public:
  double operator()(double principal);
  void reset() { started_ = false; }

 private:
  bool started_ = false;
  double last_ = 0.0;
};

/// Fields on the null lift: rho(x, u) = rho(x), S(x, u) = m u + S(x), with
/// the null coordinate u appended last.
PolarField lift_polar_field(const PolarField& f, double mass);
/// Psi(x, u) = exp(i m u) psi(x).
ComplexField lift_complex_field(const ComplexField& psi, double mass);

// ---------------------------------------------------------------------------
// Relativistic background

/// (dS - qA) g^{-1} (dS - qA) + m^2.
double classical_hj_residual_rel(const BackgroundRel& bg, const PolarField& f, const Point& x);

/// J^M = rho sqrt(-g) g^{MN} (d_N S - q A_N).
Vec ensemble_current(const BackgroundRel& bg, const PolarField& f, const Point& x);

/// d_M J^M, expanded by the product rule through the derivative providers.
double continuity_residual_rel(const BackgroundRel& bg, const PolarField& f, const Point& x);

/// Q = -(1/4rho^2) g^{MN} d_M rho d_N rho - (1/sqrt(-g)) d_M[sqrt(-g) g^{MN} (1/2rho) d_N rho],
/// which equals -box(sqrt rho)/sqrt rho. Throws NodeEncountered.
double quantum_potential_rel(const BackgroundRel& bg, const PolarField& f, const Point& x);

/// Classical HJ residual plus Q.
double quantum_hj_residual_rel(const BackgroundRel& bg, const PolarField& f, const Point& x);

/// (1/sqrt(-g)) D_M[sqrt(-g) g^{MN} D_N psi] - m^2 psi with D = d - iqA.
Complex linear_kg_residual(const BackgroundRel& bg, const ComplexField& psi, const Point& x);

/// Euler-Lagrange equation for psi_clas of the classical ensemble action
/// I_class, divided by sqrt(-g):
///   1/2 D[g Dpsi] + (1/4psi) Dpsi.Dpsi - m^2 psi
///   - psi/(4 psi*^2) (Dpsi)*.(Dpsi)* - 1/2 D[(psi/psi*) g (Dpsi)*].
/// Nonlinear in psi; vanishes iff the polar pair solves classical HJ and
/// continuity. Throws NodeEncountered.
Complex classical_field_residual(const BackgroundRel& bg, const ComplexField& psi, const Point& x);

/// The same equation with the coefficients exactly as they appear in the
/// source derivation (+m^2 psi, psi/(4 psi*) denominator). Kept to report the
/// discrepancy; it does not vanish on a single on-shell plane wave.
Complex classical_field_residual_as_printed(const BackgroundRel& bg, const ComplexField& psi,
                                            const Point& x);

/// -psi * HJ_classical + i * continuity / (sqrt(-g) psi*), the polar form of
/// classical_field_residual.
Complex classical_field_residual_polar(const BackgroundRel& bg, const PolarField& f, const Point& x);

// ---------------------------------------------------------------------------
// Newton-Cartan background. Here A_mu is the reduced gauge field
// Abar_mu - phi M_mu and c = m - q phi.

/// 2c vhat.(dS - qA) - (dS - qA) h (dS - qA) - 2 c^2 Phi.
double nc_classical_hj_residual(const NCBackground& nc, const PolarField& f, const Point& x);

/// Equivalent (v, M) form: -[(P + cM) h (P + cM) - 2c v.(P + cM)], P = dS - qA.
/// The printed left-hand side of that form is the negative of the (vhat, Phi) form.
double nc_classical_hj_residual_vm(const NCBackground& nc, const PolarField& f, const Point& x);

/// Q = (1/4rho^2) h d rho d rho + (1/2e) d_mu[(1/rho) e h^{mu nu} d_nu rho].
double nc_quantum_potential(const NCBackground& nc, const PolarField& f, const Point& x);

double nc_quantum_hj_residual(const NCBackground& nc, const PolarField& f, const Point& x);

/// d_mu[e c rho vhat^mu] - d_mu[e rho h^{mu nu}(d_nu S - q A_nu)].
double nc_continuity_residual(const NCBackground& nc, const PolarField& f, const Point& x);

/// Euler-Lagrange residual of the Schrodinger action in the NC background,
/// divided by e:
///   -2ic vhat.Dpsi - (i/e) d_mu(e c vhat^mu) psi + (1/e) D_mu(e h^{mu nu} D_nu psi) - 2 Phi c^2 psi.
/// In flat data this is 2m (i d_t psi + (1/2m) lap psi).
Complex nc_schrodinger_residual(const NCBackground& nc, const ComplexField& psi, const Point& x);

/// Euler-Lagrange residual for psi_clas of the classical NC ensemble action,
/// divided by e, through its polar form psi * HJ - i * continuity / (e psi*).
Complex nc_classical_field_residual(const NCBackground& nc, const PolarField& f, const Point& x);

}  // namespace bohm
