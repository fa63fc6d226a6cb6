#pragma once

#include "bohm/core.hpp"
#include "bohm/field.hpp"
#include "bohm/geometry.hpp"
#include "bohm/nc_reduction.hpp"
#include "bohm/report.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace bohm {

enum class Parametrization { proper_time, coordinate_time, affine };
enum class VelocityLaw { classical, quantum };

const char* to_string(Parametrization p);

struct TrajectorySample {
  double lambda;
  Point X;
  Covector p;  // d_M S at X
  double constraint_residual;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  Parametrization parametrization = Parametrization::proper_time;
};

/// Guidance of Bohmian trajectories by a fixed polar field on a
/// relativistic or Newton-Cartan background. The field is never evolved.
struct GuidanceField {
  std::variant<BackgroundRel, NCBackground> background;
  PolarField field;
  VelocityLaw law = VelocityLaw::classical;
  // Uniform rescaling of the velocity; reparametrizes lambda only.
  double lambda_scale = 1.0;

  bool is_nc() const { return std::holds_alternative<NCBackground>(background); }
  Parametrization parametrization() const;

  Vec velocity(const Point& x) const;
  // Quantum HJ residual for the quantum law, classical otherwise.
  double constraint(const Point& x) const;
};

/// u^M = g^{MN}(d_N S - q A_N) / m for the classical law, divided by
/// sqrt(m^2 + Q) for the quantum law; either way u.g.u = -1 on shell.
Vec guidance_velocity_rel(const BackgroundRel& bg, const PolarField& f, const Point& x,
                          VelocityLaw law = VelocityLaw::classical);

/// Xdot^mu = (h^{mu nu}(d_nu S - q A_nu) - c vhat^mu) / c, c = m - q phi,
/// normalized so that tau_mu Xdot^mu = 1.
Vec guidance_velocity_nc(const NCBackground& nc, const PolarField& f, const Point& x);

struct IntegratorOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double max_step_fraction = 1e-2;  // of the lambda span
  std::optional<double> fixed_step;  // disables error control
  long max_steps = 5'000'000;
};

/// Dormand-Prince 5(4) integration of the guidance law from x0, sampled at
/// `steps` + 1 uniformly spaced lambda values in [lambda0, lambda1].
/// Throws NodeEncountered if rho drops to kNodeEpsilon, StepFailure if the
/// error control cannot meet the tolerance.
Trajectory integrate_trajectory(const GuidanceField& gf, const Point& x0, double lambda0,
                                double lambda1, int steps, const IntegratorOptions& opts = {});

// ---------------------------------------------------------------------------
// Lagrangians

/// L_Q = -sqrt(m^2 + Q) sqrt(-Xdot g Xdot) + q A.Xdot with Q evaluated from f at x.
/// Throws TachyonicInput if Xdot g Xdot >= 0, ImaginaryMass if m^2 + Q <= 0.
double lagrangian_quantum_rel(const BackgroundRel& bg, const PolarField& f, const Point& x,
                              const Vec& xdot);
double lagrangian_quantum_rel(const BackgroundRel& bg, double Q, const Point& x, const Vec& xdot);

/// p_M = sqrt(m^2 + Q) g_MN Xdot^N / sqrt(-Xdot g Xdot) + q A_M.
Covector momentum_quantum_rel(const BackgroundRel& bg, double Q, const Point& x, const Vec& xdot);

/// Classical: c/(2 tau.Xdot) Xdot hbar Xdot + q A.Xdot, c = m - q phi.
/// Quantum adds Q tau.Xdot / (2c).
/// Throws DegenerateVelocity if tau.Xdot <= 0, MassSingular if c = 0.
double lagrangian_nc(const NCBackground& nc, const PolarField& f, const Point& x, const Vec& xdot,
                     bool quantum);
double lagrangian_nc(const NCBackground& nc, double Q, const Point& x, const Vec& xdot, bool quantum);

/// p_mu = -c/(2 (tau.Xdot)^2) tau_mu Xdot hbar Xdot + q A_mu + c hbar_{mu nu} Xdot^nu / tau.Xdot,
/// plus Q tau_mu / (2c) for the quantum Lagrangian.
Covector momentum_nc(const NCBackground& nc, double Q, const Point& x, const Vec& xdot, bool quantum);

/// Quantum Hamiltonian constraint with p_M = d_M S at every sample:
/// rel: (p - qA) g^{-1} (p - qA) + m^2 + Q;
/// NC:  2c vhat.(p - qA) - (p - qA) h (p - qA) - 2 Phi c^2 + Q.
ResidualReport hamiltonian_constraint_residual(const Trajectory& traj, const GuidanceField& gf);

}  // namespace bohm
