#include "bohm/dynamics.hpp"

#include "bohm/pilot_wave.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace bohm {
namespace {

void require_density(const PolarField& f, const Point& x) {
  const double rho = f.rho(x);
  if (!(rho > kNodeEpsilon)) throw NodeEncountered("rho = " + std::to_string(rho) + " along trajectory");
}

double quantum_potential(const GuidanceField& gf, const Point& x) {
  if (const auto* nc = std::get_if<NCBackground>(&gf.background)) return nc_quantum_potential(*nc, gf.field, x);
  return quantum_potential_rel(std::get<BackgroundRel>(gf.background), gf.field, x);
}

// Dormand-Prince 5(4) tableau.
constexpr std::array<double, 7> kC{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
constexpr std::array<double, 7> kB{35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr std::array<double, 7> kBStar{5179.0 / 57600, 0.0,          7571.0 / 16695, 393.0 / 640,
                                       -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

struct StepResult {
  Vec y;
  Vec err;
  bool finite;
};

template <class Rhs>
StepResult dopri_step(const Rhs& rhs, const Vec& y, double h) {
  std::array<Vec, 7> k;
  k[0] = rhs(y);
  for (int s = 1; s < 7; ++s) {
    Vec ys = y;
    for (int j = 0; j < s; ++j)
      if (kA[s][j] != 0.0) ys += h * kA[s][j] * k[j];
    k[s] = rhs(ys);
  }
  StepResult r{y, Vec::Zero(y.size()), true};
  for (int s = 0; s < 7; ++s) {
    r.y += h * kB[s] * k[s];
    r.err += h * (kB[s] - kBStar[s]) * k[s];
  }
  r.finite = r.y.allFinite() && r.err.allFinite();
  return r;
}

}  // namespace

const char* to_string(Parametrization p) {
  switch (p) {
    case Parametrization::proper_time: return "proper_time";
    case Parametrization::coordinate_time: return "coordinate_time";
    case Parametrization::affine: return "affine";
  }
  return "affine";
}

Parametrization GuidanceField::parametrization() const {
  if (lambda_scale != 1.0) return Parametrization::affine;
  return is_nc() ? Parametrization::coordinate_time : Parametrization::proper_time;
}

Vec GuidanceField::velocity(const Point& x) const {
  require_density(field, x);
  if (const auto* nc = std::get_if<NCBackground>(&background)) return lambda_scale * guidance_velocity_nc(*nc, field, x);
  return lambda_scale * guidance_velocity_rel(std::get<BackgroundRel>(background), field, x, law);
}

double GuidanceField::constraint(const Point& x) const {
  const bool quantum = law == VelocityLaw::quantum;
  if (const auto* nc = std::get_if<NCBackground>(&background))
    return quantum ? nc_quantum_hj_residual(*nc, field, x) : nc_classical_hj_residual(*nc, field, x);
  const auto& bg = std::get<BackgroundRel>(background);
  return quantum ? quantum_hj_residual_rel(bg, field, x) : classical_hj_residual_rel(bg, field, x);
}

Vec guidance_velocity_rel(const BackgroundRel& bg, const PolarField& f, const Point& x, VelocityLaw law) {
  const Mat g_inv = metric_inverse(bg, x);
  const Covector P = f.S.grad(x) - bg.charge * gauge_field(bg, x);
  double mass_sq = bg.mass * bg.mass;
  if (law == VelocityLaw::quantum) mass_sq += quantum_potential_rel(bg, f, x);
  if (!(mass_sq > 0.0)) throw ImaginaryMass("m^2 + Q = " + std::to_string(mass_sq));
  return g_inv * P / std::sqrt(mass_sq);
}

Vec guidance_velocity_nc(const NCBackground& nc, const PolarField& f, const Point& x) {
  const NCDerived d = derive_nc(nc, x);
  const double c = nc.mass - nc.charge * d.phi;
  if (std::abs(c) < 1e-14) throw MassSingular("m - q phi = 0");
  const Covector P = f.S.grad(x) - nc.charge * d.gauge;
  return (d.h_up * P - c * d.v_hat) / c;
}

Trajectory integrate_trajectory(const GuidanceField& gf, const Point& x0, double lambda0, double lambda1,
                                int steps, const IntegratorOptions& opts) {
  if (steps < 1) throw StepFailure("need at least one output interval");
  if (!(lambda1 > lambda0)) throw StepFailure("lambda span must be increasing");
  require_density(gf.field, x0);

  const auto rhs = [&gf](const Vec& y) { return gf.velocity(y); };
  const double span = lambda1 - lambda0;
  const double max_step = opts.max_step_fraction * span;
  const double min_step = 1e-14 * span;

  Trajectory traj;
  traj.parametrization = gf.parametrization();
  auto record = [&](double lambda, const Vec& y) {
    traj.samples.push_back({lambda, y, gf.field.S.grad(y), gf.constraint(y)});
  };

  Vec y = x0;
  record(lambda0, y);
  double h = std::min(max_step, 1e-3 * span);
  long taken = 0;

  for (int k = 1; k <= steps; ++k) {
    const double a = lambda0 + span * (k - 1) / steps;
    const double b = lambda0 + span * k / steps;
    double t = a;
    if (opts.fixed_step) {
      const int n = std::max(1, static_cast<int>(std::ceil((b - a) / *opts.fixed_step - 1e-9)));
      const double hf = (b - a) / n;
      for (int i = 0; i < n; ++i) {
        const StepResult r = dopri_step(rhs, y, hf);
        if (!r.finite) throw StepFailure("non-finite state at lambda = " + std::to_string(t));
        y = r.y;
        t += hf;
      }
    } else {
      while (t < b) {
        if (++taken > opts.max_steps) throw StepFailure("step budget exhausted");
        const bool last = t + h >= b;
        const double step = last ? b - t : h;
        const StepResult r = dopri_step(rhs, y, step);
        double err = std::numeric_limits<double>::infinity();
        if (r.finite) {
          const Vec scale = (opts.atol + opts.rtol * y.cwiseAbs().cwiseMax(r.y.cwiseAbs()).array()).matrix();
          err = std::sqrt((r.err.array() / scale.array()).square().mean());
        }
        const bool accepted = err <= 1.0;
        if (accepted) {
          y = r.y;
          t = last ? b : t + step;
        }
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        // A step truncated to hit the sample point says little about the next one.
        h = (accepted && last) ? std::max(h, step * factor) : step * factor;
        h = std::min(max_step, h);
        if (h < min_step) throw StepFailure("step size underflow at lambda = " + std::to_string(t));
      }
    }
    record(b, y);
  }
  return traj;
}

// ---------------------------------------------------------------------------

double lagrangian_quantum_rel(const BackgroundRel& bg, double Q, const Point& x, const Vec& xdot) {
  const double norm = xdot.dot(bg.metric(x) * xdot);
  if (!(norm < 0.0)) throw TachyonicInput("Xdot g Xdot = " + std::to_string(norm));
  const double mass_sq = bg.mass * bg.mass + Q;
  if (!(mass_sq > 0.0)) throw ImaginaryMass("m^2 + Q = " + std::to_string(mass_sq));
  return -std::sqrt(mass_sq) * std::sqrt(-norm) + bg.charge * gauge_field(bg, x).dot(xdot);
}

double lagrangian_quantum_rel(const BackgroundRel& bg, const PolarField& f, const Point& x, const Vec& xdot) {
  return lagrangian_quantum_rel(bg, quantum_potential_rel(bg, f, x), x, xdot);
}

Covector momentum_quantum_rel(const BackgroundRel& bg, double Q, const Point& x, const Vec& xdot) {
  const Mat g = bg.metric(x);
  const double norm = xdot.dot(g * xdot);
  if (!(norm < 0.0)) throw TachyonicInput("Xdot g Xdot = " + std::to_string(norm));
  const double mass_sq = bg.mass * bg.mass + Q;
  if (!(mass_sq > 0.0)) throw ImaginaryMass("m^2 + Q = " + std::to_string(mass_sq));
  return std::sqrt(mass_sq) * g * xdot / std::sqrt(-norm) + bg.charge * gauge_field(bg, x);
}

namespace {

struct NCKinematics {
  NCDerived d;
  double c;
  double tau_xdot;
};

NCKinematics nc_kinematics(const NCBackground& nc, const Point& x, const Vec& xdot) {
  NCKinematics k{derive_nc(nc, x), 0.0, 0.0};
  k.c = nc.mass - nc.charge * k.d.phi;
  if (std::abs(k.c) < 1e-14) throw MassSingular("m - q phi = 0");
  k.tau_xdot = k.d.tau.dot(xdot);
  if (!(k.tau_xdot > 1e-14))
    throw DegenerateVelocity("tau.Xdot = " + std::to_string(k.tau_xdot) + " must be positive");
  return k;
}

}  // namespace

double lagrangian_nc(const NCBackground& nc, double Q, const Point& x, const Vec& xdot, bool quantum) {
  const NCKinematics k = nc_kinematics(nc, x, xdot);
  double L = k.c / (2.0 * k.tau_xdot) * xdot.dot(k.d.hbar_down * xdot) + nc.charge * k.d.gauge.dot(xdot);
  if (quantum) L += Q * k.tau_xdot / (2.0 * k.c);
  return L;
}

double lagrangian_nc(const NCBackground& nc, const PolarField& f, const Point& x, const Vec& xdot, bool quantum) {
  const double Q = quantum ? nc_quantum_potential(nc, f, x) : 0.0;
  return lagrangian_nc(nc, Q, x, xdot, quantum);
}

Covector momentum_nc(const NCBackground& nc, double Q, const Point& x, const Vec& xdot, bool quantum) {
  const NCKinematics k = nc_kinematics(nc, x, xdot);
  const double tx = k.tau_xdot;
  Covector p = -k.c / (2.0 * tx * tx) * xdot.dot(k.d.hbar_down * xdot) * k.d.tau + nc.charge * k.d.gauge +
               k.c * (k.d.hbar_down * xdot) / tx;
  if (quantum) p += Q / (2.0 * k.c) * k.d.tau;
  return p;
}

ResidualReport hamiltonian_constraint_residual(const Trajectory& traj, const GuidanceField& gf) {
  ResidualReport report("hamiltonian_constraint");
  for (const auto& s : traj.samples) {
    const double Q = quantum_potential(gf, s.X);
    double value = 0.0;
    if (const auto* nc = std::get_if<NCBackground>(&gf.background)) {
      const NCDerived d = derive_nc(*nc, s.X);
      const double c = nc->mass - nc->charge * d.phi;
      const Covector P = s.p - nc->charge * d.gauge;
      value = 2.0 * c * d.v_hat.dot(P) - P.dot(d.h_up * P) - 2.0 * d.Phi * c * c + Q;
    } else {
      const auto& bg = std::get<BackgroundRel>(gf.background);
      const Covector P = s.p - bg.charge * gauge_field(bg, s.X);
      value = P.dot(metric_inverse(bg, s.X) * P) + bg.mass * bg.mass + Q;
    }
    report.add(s.X, value);
  }
  return report;
}

}  // namespace bohm
