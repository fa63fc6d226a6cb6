#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bohm/dynamics.hpp"
#include "bohm/pilot_wave.hpp"
#include "bohm/scenarios.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace bohm;

namespace {

PolarField plane_polar(const Covector& p, double rho = 1.0) {
  PolarField f;
  f.rho = constant_field(static_cast<int>(p.size()), rho);
  f.S.value = [p](const Point& x) { return p.dot(x); };
  f.S.gradient = [p](const Point&) { return p; };
  f.S.hessian = [p](const Point&) { return Mat::Zero(p.size(), p.size()).eval(); };
  return f;
}

Vec fd_velocity_gradient(const std::function<double(const Vec&)>& L, const Vec& v, double h = 1e-6) {
  Vec g(v.size());
  for (int i = 0; i < v.size(); ++i) g(i) = oracle::partial_scalar(L, v, i, h);
  return g;
}

NCBackground varying_nc(double m, double q) {
  NCBackground bg;
  bg.dim = 2;
  bg.mass = m;
  bg.charge = q;
  bg.tau = [](const Point& x) {
    Covector t(2);
    t << 1 + 0.1 * x(1), 0.05 * x(0);
    return t;
  };
  bg.vierbein = [](const Point& x) {
    Mat e(2, 1);
    e << 0.05 * x(1) * x(1), 1 + 0.1 * std::sin(x(0));
    return e;
  };
  bg.mass_gauge = [](const Point& x) {
    Covector M(2);
    M << 0.2 + 0.1 * x(1), 0.1 * x(0);
    return M;
  };
  bg.gauge_bar = [](const Point& x) {
    Covector A(2);
    A << 0.1 * x(1), 0.2;
    return A;
  };
  bg.phi_gauge = [](const Point& x) { return 0.1 + 0.05 * x(0); };
  return bg;
}

BackgroundRel curved(int D, double m, double q) {
  BackgroundRel bg;
  bg.dim = D;
  bg.mass = m;
  bg.charge = q;
  bg.metric = [D](const Point& x) {
    const double om = 1 + 0.1 * x(1) + 0.05 * std::sin(x(0));
    return (om * om * oracle::minkowski(D)).eval();
  };
  bg.gauge = [D](const Point& x) {
    Covector A = Covector::Zero(D);
    A(0) = 0.2 * x(1);
    A(1) = -0.1 * x(0) * x(0);
    return A;
  };
  return bg;
}

// Cubic Hermite polyline through trajectory samples, reparametrized by arc length.
struct ArcPath {
  std::vector<Point> X;
  std::vector<Vec> V;
  std::vector<double> s;  // cumulative length at samples
  double h = 0;

  Point at(std::size_t i, double t) const {  // t in [0,1] on segment i
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * X[i] + h * (t3 - 2 * t2 + t) * V[i] + (-2 * t3 + 3 * t2) * X[i + 1] +
           h * (t3 - t2) * V[i + 1];
  }
  double speed(std::size_t i, double t) const {
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * X[i] + h * (3 * t2 - 4 * t + 1) * V[i] + (-6 * t2 + 6 * t) * X[i + 1] +
            h * (3 * t2 - 2 * t) * V[i + 1])
               .norm() /
           h;
  }
  double length(std::size_t i, double t) const {  // Gauss-Legendre on [0, t]
    static const double xg[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                 0.9061798459386640};
    static const double wg[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                 0.4786286704993665, 0.2369268850561891};
    double acc = 0;
    for (int k = 0; k < 5; ++k) acc += wg[k] * speed(i, 0.5 * t * (xg[k] + 1));
    return 0.5 * t * h * acc;
  }

  ArcPath(const Trajectory& tr, const GuidanceField& gf) {
    h = tr.samples[1].lambda - tr.samples[0].lambda;
    for (const auto& smp : tr.samples) {
      X.push_back(smp.X);
      V.push_back(gf.velocity(smp.X));
    }
    s.push_back(0);
    for (std::size_t i = 0; i + 1 < X.size(); ++i) s.push_back(s.back() + length(i, 1.0));
  }

  Point at_length(double target) const {
    std::size_t i = std::upper_bound(s.begin(), s.end(), target) - s.begin();
    i = std::clamp<std::size_t>(i, 1, s.size() - 1) - 1;
    double lo = 0, hi = 1;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (s[i] + length(i, mid) < target ? lo : hi) = mid;
    }
    return at(i, 0.5 * (lo + hi));
  }
};

}  // namespace

TEST_CASE("relativistic guidance velocity") {
  const double m = 1.3;
  Covector p(4);
  p << -m, 0, 0, 0;
  const Point x = Point::Zero(4);
  Vec u = guidance_velocity_rel(minkowski(4, m), plane_polar(p), x);
  CHECK((u - Vec::Unit(4, 0)).cwiseAbs().maxCoeff() < 1e-15);

  // Boosted plane wave.
  for (double eta : {-1.5, -0.3, 0.4, 2.0}) {
    p << -m * std::cosh(eta), m * std::sinh(eta), 0, 0;
    u = guidance_velocity_rel(minkowski(4, m), plane_polar(p), x);
    CHECK(u(0) == doctest::Approx(std::cosh(eta)).epsilon(1e-14));
    CHECK(u(1) == doctest::Approx(std::sinh(eta)).epsilon(1e-14));
    CHECK(u(1) / u(0) == doctest::Approx(std::tanh(eta)).epsilon(1e-14));
  }

  // Mass-shell normalization on a curved background.
  const Scenario cd = build("curved-diagonal");
  oracle::Rng rng(51);
  for (int n = 0; n < 100; ++n) {
    Point y = rng.vec(4, -1, 1);
    y(1) *= 2;
    if (!(std::abs(classical_hj_residual_rel(*cd.rel, *cd.polar, y)) < 1e-10)) continue;
    const Vec v = guidance_velocity_rel(*cd.rel, *cd.polar, y);
    CHECK(std::abs(v.dot(cd.rel->metric(y) * v) + 1) < 1e-8);
  }
  // Quantum law normalizes with m^2 + Q.
  const Scenario sp = build("minkowski-superposition");
  for (int n = 0; n < 50; ++n) {
    const Point y = rng.vec(4, -2, 2);
    const double msq = 1 + quantum_potential_rel(*sp.rel, *sp.polar, y);
    if (msq <= 0) {
      CHECK_THROWS_AS(guidance_velocity_rel(*sp.rel, *sp.polar, y, VelocityLaw::quantum), ImaginaryMass);
      continue;
    }
    const Vec v = guidance_velocity_rel(*sp.rel, *sp.polar, y, VelocityLaw::quantum);
    CHECK(std::abs(v.dot(oracle::minkowski(4) * v) + 1) < 1e-9);
  }
}

TEST_CASE("NC guidance velocity") {
  const double m = 1.7;
  Vec k(2);
  k << 0.5, -0.8;
  Covector p(3);
  p << -k.squaredNorm() / (2 * m), k;
  Vec v = guidance_velocity_nc(flat_nc(3, m), plane_polar(p), Point::Zero(3));
  CHECK(v(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((v.tail(2) - k / m).cwiseAbs().maxCoeff() < 1e-15);

  p.setZero();
  v = guidance_velocity_nc(flat_nc(3, m), plane_polar(p), Point::Zero(3));
  CHECK((v - Vec::Unit(3, 0)).cwiseAbs().maxCoeff() < 1e-15);

  // Packet phase S = x^2 T / (4 s0^2 (1 + T^2)) + f(t), T = t / (2 m s0^2).
  const Scenario gp = build("flat-nc-gaussian-packet", {{"m", {1.2}}, {"sigma0", {0.8}}});
  for (double t : {0.0, 0.5, 2.0}) {
    for (double x : {-1.0, 0.3, 1.4}) {
      const double s0 = 0.8, T = t / (2 * 1.2 * s0 * s0);
      const double dS = x * T / (2 * s0 * s0 * (1 + T * T));
      Point X(2);
      X << t, x;
      v = guidance_velocity_nc(*gp.nc, *gp.polar, X);
      CHECK(v(0) == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(std::abs(v(1) - dS / 1.2) < 1e-12);
    }
  }

  // tau.Xdot = 1 on varying data.
  const NCBackground nc = varying_nc(1.2, 0.4);
  oracle::Rng rng(52);
  for (int n = 0; n < 50; ++n) {
    const Point x = rng.vec(2, -1, 1);
    const Vec w = guidance_velocity_nc(nc, plane_polar(rng.vec(2, -1, 1)), x);
    CHECK(nc.tau(x).dot(w) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("plane-wave trajectories are straight lines") {
  const Scenario s = build("minkowski-plane-wave");
  const GuidanceField gf = s.guidance();
  CHECK(gf.parametrization() == Parametrization::proper_time);
  for (const Point& x0 : s.seeds) {
    const Trajectory tr = integrate_trajectory(gf, x0, 0.0, 10.0, 50);
    CHECK(tr.samples.size() == 51);
    for (std::size_t i = 1; i < tr.samples.size(); ++i) CHECK(tr.samples[i].lambda > tr.samples[i - 1].lambda);
    for (const auto& smp : tr.samples) {
      CHECK((smp.X - s.trajectory_oracle(x0, smp.lambda)).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(std::abs(smp.constraint_residual) < 1e-9);
    }
    CHECK(hamiltonian_constraint_residual(tr, gf).max_abs() < 1e-9);
  }
}

TEST_CASE("Gaussian packet trajectories follow the spreading width") {
  const Scenario s = build("flat-nc-gaussian-packet");
  const GuidanceField gf = s.guidance();
  CHECK(gf.parametrization() == Parametrization::coordinate_time);
  for (const Point& x0 : s.seeds) {
    const Trajectory tr = integrate_trajectory(gf, x0, 0.0, s.span, 100);
    double worst = 0;
    for (const auto& smp : tr.samples) {
      const Point ref = s.trajectory_oracle(x0, smp.lambda);
      worst = std::max(worst, std::abs(smp.X(1) - ref(1)) / std::abs(ref(1)));
      CHECK(std::abs(smp.X(0) - ref(0)) < 1e-10);
    }
    CHECK(worst < 1e-4);
    CHECK(hamiltonian_constraint_residual(tr, gf).max_abs() < 1e-5);
  }
}

TEST_CASE("integrator convergence order") {
  // Stationary phase S = m x^2 / 2 on flat data: x' = x, x(t) = x0 e^t.
  const double m = 1.5, x0 = 0.5, span = 2.0;
  PolarField f;
  f.rho = constant_field(2, 1.0);
  f.S.value = [m](const Point& x) { return 0.5 * m * x(1) * x(1); };
  f.S.gradient = [m](const Point& x) {
    Vec g(2);
    g << 0.0, m * x(1);
    return g;
  };
  const GuidanceField gf{flat_nc(2, m), f, VelocityLaw::classical};
  Point start(2);
  start << 0.0, x0;
  std::vector<double> err;
  for (double h : {0.2, 0.1, 0.05, 0.025}) {
    IntegratorOptions opts;
    opts.fixed_step = h;
    const Trajectory tr = integrate_trajectory(gf, start, 0.0, span, 1, opts);
    err.push_back(std::abs(tr.samples.back().X(1) - x0 * std::exp(span)));
  }
  for (std::size_t i = 0; i + 1 < err.size(); ++i) {
    const double slope = std::log2(err[i] / err[i + 1]);
    MESSAGE("observed order " << slope << " err " << err[i + 1]);
    CHECK(std::abs(slope - 5.0) < 0.5);
  }
}

TEST_CASE("curved geodesics with constant density") {
  const Scenario s = build("curved-diagonal");
  const GuidanceField gf = s.guidance();
  for (const Point& x0 : s.seeds) {
    const Trajectory tr = integrate_trajectory(gf, x0, 0.0, s.span, 50);
    const Vec u0 = gf.velocity(x0);
    const auto ref = oracle::geodesic_rk4(s.rel->metric, x0, u0, s.span, 20000);
    CHECK((tr.samples.back().X - ref.back()).cwiseAbs().maxCoeff() < 1e-6);
    for (const auto& smp : tr.samples) CHECK(std::abs(smp.constraint_residual) < 1e-9);
  }
}

TEST_CASE("rescaling lambda leaves the path invariant") {
  auto compare = [](const GuidanceField& base, const Point& x0, double span, double scale) {
    GuidanceField fast = base;
    fast.lambda_scale = scale;
    CHECK(fast.parametrization() == Parametrization::affine);
    const Trajectory a = integrate_trajectory(base, x0, 0.0, span, 200);
    const Trajectory b = integrate_trajectory(fast, x0, 0.0, span / scale, 137);
    const ArcPath pa(a, base), pb(b, fast);
    CHECK(std::abs(pa.s.back() - pb.s.back()) < 1e-8);
    double worst = 0;
    for (int k = 0; k <= 100; ++k) {
      const double target = pa.s.back() * k / 100.0;
      worst = std::max(worst, (pa.at_length(target) - pb.at_length(target)).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-8);
  };
  const Scenario gp = build("flat-nc-gaussian-packet");
  compare(gp.guidance(), gp.seeds.front(), gp.span, 2.5);
  compare(gp.guidance(), gp.seeds.back(), gp.span, 0.4);
  const Scenario cd = build("curved-diagonal");
  compare(cd.guidance(), cd.seeds.front(), cd.span, 3.0);
}

TEST_CASE("integration errors") {
  const Scenario s = build("flat-nc-plane-wave");
  GuidanceField gf = s.guidance();
  const Point x0 = s.seeds.front();
  CHECK_THROWS_AS(integrate_trajectory(gf, x0, 1.0, 0.0, 10), StepFailure);
  CHECK_THROWS_AS(integrate_trajectory(gf, x0, 0.0, 1.0, 0), StepFailure);
  IntegratorOptions tight;
  tight.max_steps = 3;
  CHECK_THROWS_AS(integrate_trajectory(gf, x0, 0.0, 5.0, 1, tight), StepFailure);

  // Density falls to zero at t = 2.
  gf.field.rho.value = [](const Point& x) { return 1 - x(0) / 2; };
  gf.field.rho.gradient = [](const Point&) {
    Vec g(2);
    g << -0.5, 0;
    return g;
  };
  gf.field.rho.hessian = [](const Point&) { return Mat::Zero(2, 2).eval(); };
  gf.law = VelocityLaw::classical;
  CHECK_NOTHROW(integrate_trajectory(gf, x0, 0.0, 1.5, 10));
  CHECK_THROWS_AS(integrate_trajectory(gf, x0, 0.0, 3.0, 10), NodeEncountered);

  // Velocity blowing up in finite time: dx/dt = 1/(1 - t) through S.
  PolarField blow;
  blow.rho = constant_field(2, 1.0);
  blow.S.value = [](const Point& x) { return -std::log(std::abs(1 - x(0))) * x(1); };
  blow.S.gradient = [](const Point& x) {
    Vec g(2);
    g << x(1) / (1 - x(0)), 1 / (1 - x(0));
    return g;
  };
  GuidanceField bad{flat_nc(2), blow, VelocityLaw::classical};
  CHECK_THROWS_AS(integrate_trajectory(bad, Point::Zero(2), 0.0, 2.0, 4), StepFailure);
}

TEST_CASE("relativistic quantum Lagrangian") {
  const double m = 1.4;
  const BackgroundRel flat = minkowski(4, m);
  const Vec rest = Vec::Unit(4, 0);
  const Point x = Point::Zero(4);
  CHECK(lagrangian_quantum_rel(flat, 0.0, x, rest) == doctest::Approx(-m).epsilon(1e-15));
  CHECK(lagrangian_quantum_rel(flat, 3 * m * m, x, rest) == doctest::Approx(-2 * m).epsilon(1e-15));
  PolarField c;
  c.rho = constant_field(4, 2.0);
  c.S = constant_field(4, 0.0);
  CHECK(lagrangian_quantum_rel(flat, c, x, rest) == doctest::Approx(-m).epsilon(1e-12));
  // Reparametrization invariance.
  Vec v(4);
  v << 1.5, 0.3, -0.4, 0.2;
  CHECK(lagrangian_quantum_rel(flat, 0.5, x, 2.0 * v) ==
        doctest::Approx(2 * lagrangian_quantum_rel(flat, 0.5, x, v)).epsilon(1e-14));

  CHECK_THROWS_AS(lagrangian_quantum_rel(flat, 0.0, x, Vec::Unit(4, 1)), TachyonicInput);
  Vec null(4);
  null << 1, 1, 0, 0;
  CHECK_THROWS_AS(lagrangian_quantum_rel(flat, 0.0, x, null), TachyonicInput);
  CHECK_THROWS_AS(lagrangian_quantum_rel(flat, -m * m, x, rest), ImaginaryMass);
  CHECK_THROWS_AS(lagrangian_quantum_rel(flat, -2 * m * m, x, rest), ImaginaryMass);
}

TEST_CASE("relativistic Legendre round trip") {
  oracle::Rng rng(53);
  const BackgroundRel bg = curved(4, 1.2, 0.4);
  for (int n = 0; n < 100; ++n) {
    const Point x = rng.vec(4, -1, 1);
    Vec v = rng.vec(4, -0.5, 0.5);
    v(0) = 1.0 + rng.uniform(0, 1);
    const double Q = rng.uniform(-0.5, 2.0);
    auto L = [&](const Vec& w) { return lagrangian_quantum_rel(bg, Q, x, w); };
    const Covector p = momentum_quantum_rel(bg, Q, x, v);
    CHECK((p - fd_velocity_gradient(L, v)).cwiseAbs().maxCoeff() < 1e-7);
    // Homogeneous of degree one: p.Xdot - L = 0, and the constraint holds identically.
    CHECK(std::abs(p.dot(v) - L(v)) < 1e-12);
    const Covector P = p - bg.charge * bg.gauge(x);
    const Mat gi = oracle::gauss_jordan_inverse(bg.metric(x));
    CHECK(std::abs(P.dot(gi * P) + bg.mass * bg.mass + Q) < 1e-11);
  }
  // Q = 0: the classical momentum m g u + qA.
  const BackgroundRel flat = minkowski(4, 1.1, 0.0);
  Vec u(4);
  u << std::cosh(0.7), std::sinh(0.7), 0, 0;
  const Covector p = momentum_quantum_rel(flat, 0.0, Point::Zero(4), u);
  CHECK((p - 1.1 * oracle::minkowski(4) * u).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("NC Lagrangian") {
  const double m = 1.3;
  const NCBackground flat = flat_nc(2, m);
  for (double v : {-0.7, 0.0, 0.4, 2.0}) {
    Vec xd(2);
    xd << 1.0, v;
    CHECK(lagrangian_nc(flat, 0.0, Point::Zero(2), xd, false) == doctest::Approx(0.5 * m * v * v).epsilon(1e-15));
    CHECK(lagrangian_nc(flat, 0.0, Point::Zero(2), xd, true) == doctest::Approx(0.5 * m * v * v).epsilon(1e-15));
    CHECK(lagrangian_nc(flat, 0.6, Point::Zero(2), xd, true) ==
          doctest::Approx(0.5 * m * v * v + 0.6 / (2 * m)).epsilon(1e-15));
  }
  Vec rest(2);
  rest << 1.0, 0.0;
  CHECK(lagrangian_nc(flat, 0.0, Point::Zero(2), rest, false) == 0.0);

  CHECK_THROWS_AS(lagrangian_nc(flat, 0.0, Point::Zero(2), Vec::Unit(2, 1), false), DegenerateVelocity);
  NCBackground charged = flat_nc(2, 1.0, 2.0);
  charged.phi_gauge = [](const Point&) { return 0.5; };
  CHECK_THROWS_AS(lagrangian_nc(charged, 0.0, Point::Zero(2), rest, false), MassSingular);
  PolarField c;
  c.rho = constant_field(2, 1.0);
  c.S = constant_field(2, 0.0);
  CHECK_THROWS_AS(guidance_velocity_nc(charged, c, Point::Zero(2)), MassSingular);
}

TEST_CASE("NC Legendre round trip") {
  oracle::Rng rng(54);
  const NCBackground nc = varying_nc(1.2, 0.4);
  for (int n = 0; n < 100; ++n) {
    const Point x = rng.vec(2, -1, 1);
    Vec v = rng.vec(2, -1, 1);
    v(0) = 1.0 + rng.uniform(0, 1);
    if (nc.tau(x).dot(v) <= 0.1) continue;
    const double Q = rng.uniform(-1, 1);
    for (bool quantum : {false, true}) {
      auto L = [&](const Vec& w) { return lagrangian_nc(nc, Q, x, w, quantum); };
      CHECK((momentum_nc(nc, Q, x, v, quantum) - fd_velocity_gradient(L, v)).cwiseAbs().maxCoeff() < 1e-7);
      // Degree-one homogeneity.
      CHECK(std::abs(momentum_nc(nc, Q, x, v, quantum).dot(v) - L(v)) < 1e-12);
    }
  }
}

TEST_CASE("guided momenta equal the phase gradient") {
  // Classical law through a classical solution; quantum Lagrangian through the packet.
  oracle::Rng rng(55);
  const Scenario nt = build("nc-nontrivial-M");
  for (int n = 0; n < 30; ++n) {
    const Point x = rng.vec(2, -2, 2);
    const Vec v = guidance_velocity_nc(*nt.nc, *nt.polar, x);
    CHECK((momentum_nc(*nt.nc, 0.0, x, v, false) - nt.polar->S.grad(x)).cwiseAbs().maxCoeff() < 1e-12);
  }
  const Scenario gp = build("flat-nc-gaussian-packet");
  for (int n = 0; n < 30; ++n) {
    Point x = rng.vec(2, 0, 4);
    x(1) -= 2;
    const Vec v = guidance_velocity_nc(*gp.nc, *gp.polar, x);
    const double Q = nc_quantum_potential(*gp.nc, *gp.polar, x);
    CHECK((momentum_nc(*gp.nc, Q, x, v, true) - gp.polar->S.grad(x)).cwiseAbs().maxCoeff() < 1e-6);
  }
  // Relativistic: a solution of the classical equation recovers p = dS.
  const Scenario cd = build("curved-diagonal");
  for (int n = 0; n < 30; ++n) {
    const Point x = rng.vec(4, -1, 1);
    const Vec u = guidance_velocity_rel(*cd.rel, *cd.polar, x);
    CHECK((momentum_quantum_rel(*cd.rel, 0.0, x, u) - cd.polar->S.grad(x)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("Hamiltonian constraint off shell") {
  Vec k(3);
  k << 0.6, 0, 0;
  Covector p(4);
  p << -1.5, k;  // mass shell would need E = sqrt(1.36)
  const GuidanceField gf{minkowski(4), plane_polar(p), VelocityLaw::classical};
  const Trajectory tr = integrate_trajectory(gf, Point::Zero(4), 0.0, 2.0, 10);
  const ResidualReport r = hamiltonian_constraint_residual(tr, gf);
  CHECK(r.size() == tr.samples.size());
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    const double ref = classical_hj_residual_rel(minkowski(4), gf.field, tr.samples[i].X);
    CHECK(std::abs(r.samples()[i].value - ref) < 1e-14);
    CHECK(tr.samples[i].constraint_residual == doctest::Approx(ref).epsilon(1e-14));
  }
  CHECK(r.max_abs() == doctest::Approx(0.89).epsilon(1e-12));
}
