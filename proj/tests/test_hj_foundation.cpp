#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bohm/hj_foundation.hpp"
#include "bohm/scenarios.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace bohm;

namespace {

LagrangianSystem free_particle(int dim, double m) {
  LagrangianSystem s;
  s.dim = dim;
  s.lagrangian = [m](const Vec&, const Vec& v, double) { return 0.5 * m * v.squaredNorm(); };
  return s;  // no partials, no Hamiltonian: finite differences and Legendre solve
}

// Anharmonic oscillator with an explicitly lambda-dependent drive.
LagrangianSystem quartic(double drive) {
  LagrangianSystem s;
  s.dim = 1;
  s.lagrangian = [drive](const Vec& X, const Vec& v, double l) {
    const double x = X(0);
    return 0.5 * v.squaredNorm() - 0.5 * x * x - 0.25 * x * x * x * x + drive * std::sin(l) * x;
  };
  return s;
}

double oscillator_action(double m, double w, double x0, double xf, double T) {
  return m * w / (2 * std::sin(w * T)) * ((x0 * x0 + xf * xf) * std::cos(w * T) - 2 * x0 * xf);
}

BoundaryValueProblem bvp1(double x0, double xf, double l0, double lf, int nodes = 64) {
  BoundaryValueProblem b;
  b.X0 = Vec::Constant(1, x0);
  b.Xf = Vec::Constant(1, xf);
  b.lambda0 = l0;
  b.lambdaf = lf;
  b.nodes = nodes;
  return b;
}

}  // namespace

TEST_CASE("action of prescribed paths") {
  const LagrangianSystem fp = free_particle(1, 1.0);
  const BoundaryValueProblem b = bvp1(0, 1, 0, 1);
  CHECK(action_value(fp, DiscretePath::straight_line(b)) == doctest::Approx(0.5).epsilon(1e-14));

  const BoundaryValueProblem still = bvp1(0, 0, -2.0, 5.0);
  CHECK(action_value(fp, DiscretePath::straight_line(still)) == 0.0);

  // Straight line in 3D: S = m |dX|^2 / (2 dT).
  BoundaryValueProblem b3;
  b3.X0 = Vec::Zero(3);
  b3.Xf = Vec::LinSpaced(3, 1, 3);
  b3.lambda0 = 0.5;
  b3.lambdaf = 2.5;
  CHECK(action_value(free_particle(3, 2.0), DiscretePath::straight_line(b3)) ==
        doctest::Approx(2.0 * 14 / 4).epsilon(1e-13));

  // Oscillator path sampled from the closed form.
  const Scenario ho = build("harmonic-oscillator-hj");
  const double m = ho.param("m"), w = ho.param("omega");
  const BoundaryValueProblem& hb = *ho.bvp;
  const double T = hb.lambdaf - hb.lambda0;
  const DiscretePath exact = DiscretePath::from_functions(
      hb, ho.path_oracle, [&](double l) {
        const double e = 1e-3;
        const auto& f = ho.path_oracle;
        return Vec((8 * (f(l + e) - f(l - e)) - (f(l + 2 * e) - f(l - 2 * e))) / (12 * e));
      });
  CHECK(std::abs(action_value(*ho.system, exact) - oscillator_action(m, w, hb.X0(0), hb.Xf(0), T)) < 1e-8);
}

TEST_CASE("free particle extremal is the straight line") {
  const BoundaryValueProblem b = bvp1(0, 1, 0, 1);
  const DiscretePath p = extremize(free_particle(1, 1.0), b);
  CHECK(p.el_residual < 1e-8);
  for (std::size_t i = 0; i < p.lambda.size(); ++i) {
    CHECK(std::abs(p.X[i](0) - p.lambda[i]) < 1e-10);
    CHECK(std::abs(p.V[i](0) - 1.0) < 1e-10);
  }
  for (double l : {0.013, 0.4, 0.77}) CHECK(std::abs(p.position(l)(0) - l) < 1e-10);
  CHECK(action_value(free_particle(1, 1.0), p) == doctest::Approx(0.5).epsilon(1e-12));

  // Multi-dimensional with analytic data from the scenario.
  const Scenario fp = build("free-particle-hj", {{"X0", {0, 1}}, {"Xf", {1, -1}}, {"m", {2.0}}});
  const DiscretePath q = extremize(*fp.system, *fp.bvp);
  for (std::size_t i = 0; i < q.lambda.size(); ++i)
    CHECK((q.X[i] - fp.path_oracle(q.lambda[i])).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("oscillator extremal") {
  const Scenario ho = build("harmonic-oscillator-hj");
  const DiscretePath p = extremize(*ho.system, *ho.bvp);
  CHECK(p.el_residual < 1e-8);
  double worst = 0;
  for (int k = 0; k <= 200; ++k) {
    const double l = ho.bvp->lambda0 + (ho.bvp->lambdaf - ho.bvp->lambda0) * k / 200.0;
    worst = std::max(worst, (p.position(l) - ho.path_oracle(l)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-7);
  // Near the conjugate point the extremal still converges.
  const Scenario far = build("harmonic-oscillator-hj", {{"lambdaf", {3.0}}});
  const DiscretePath pf = extremize(*far.system, *far.bvp);
  CHECK(pf.el_residual < 1e-8);
  CHECK(std::abs(pf.position(1.7)(0) - far.path_oracle(1.7)(0)) < 1e-6);
}

TEST_CASE("stationarity under random perturbations") {
  oracle::Rng rng(61);
  const Scenario ho = build("harmonic-oscillator-hj");
  const LagrangianSystem nl = quartic(0.3);
  const BoundaryValueProblem nb = bvp1(0.2, -0.4, 0.0, 2.0, 40);
  const std::vector<std::pair<const LagrangianSystem*, BoundaryValueProblem>> cases{{&*ho.system, *ho.bvp},
                                                                                     {&nl, nb}};
  for (const auto& [sys, b] : cases) {
    const DiscretePath p = extremize(*sys, b);
    CHECK(p.el_residual < 1e-8);
    CHECK(discrete_action_gradient(*sys, p).cwiseAbs().maxCoeff() < 1e-8 * p.step());
    const double S0 = action_value(*sys, p);
    for (int trial = 0; trial < 10; ++trial) {
      DiscretePath dir = p;
      double norm = 0;
      for (std::size_t i = 0; i < p.X.size(); ++i) {
        dir.V[i] = rng.vec(1, -1, 1);
        dir.X[i] = (i == 0 || i + 1 == p.X.size()) ? Vec::Zero(1) : rng.vec(1, -1, 1);
        norm += dir.X[i].squaredNorm() + dir.V[i].squaredNorm();
      }
      norm = std::sqrt(norm);
      auto shifted = [&](double eps) {
        DiscretePath q = p;
        for (std::size_t i = 0; i < p.X.size(); ++i) {
          q.X[i] += eps / norm * dir.X[i];
          q.V[i] += eps / norm * dir.V[i];
        }
        return action_value(*sys, q);
      };
      const double eps = 1e-4;
      const double first = (shifted(eps) - shifted(-eps)) / (2 * eps);
      CHECK(std::abs(first) < 1e-7);
      // Second-order growth of the action change.
      const double second = shifted(eps) + shifted(-eps) - 2 * S0;
      CHECK(std::abs(shifted(2 * eps) - S0) > 2 * std::abs(shifted(eps) - S0));
      CHECK(std::abs(second) > 0);
    }
  }
}

TEST_CASE("momentum and Hamiltonian fall back to finite differences") {
  const LagrangianSystem fp = free_particle(2, 1.5);
  Vec X(2), v(2);
  X << 0.3, 0.1;
  v << -0.7, 1.2;
  CHECK((momentum(fp, X, v, 0.0) - 1.5 * v).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(hamiltonian(fp, X, 1.5 * v, 0.0) == doctest::Approx(0.5 * 1.5 * v.squaredNorm()).epsilon(1e-9));
  const LagrangianSystem nl = quartic(0.0);
  Vec x1 = Vec::Constant(1, 0.8), p1 = Vec::Constant(1, -0.6);
  const double x = 0.8;
  CHECK(hamiltonian(nl, x1, p1, 0.0) == doctest::Approx(0.18 + 0.5 * x * x + 0.25 * x * x * x * x).epsilon(1e-9));
}

TEST_CASE("Hamilton-Jacobi relations for the free particle") {
  const LagrangianSystem fp = free_particle(1, 1.0);
  const HJRelations r = verify_hj_relations(fp, bvp1(0, 1, 0, 1));
  CHECK(r.p_final(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.H_final == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(std::abs(r.dS_dXf(0) - 1.0) < 1e-5);
  CHECK(std::abs(r.dS_dlambdaf + 0.5) < 1e-5);
  CHECK(r.momentum_residual() < 5e-5);
  CHECK(r.energy_residual() < 5e-5);
  const ResidualReport rep = r.report();
  CHECK(rep.size() == 2);
  CHECK(rep.max_abs() == doctest::Approx(std::max(r.momentum_residual(), r.energy_residual())));

  // S(x, t) = m x^2 / 2t.
  const Scenario s = build("free-particle-hj", {{"X0", {0, 0}}, {"Xf", {0.7, -0.2}}, {"lambdaf", {1.3}}, {"m", {2.0}}});
  const HJRelations r2 = verify_hj_relations(*s.system, *s.bvp);
  CHECK(r2.action == doctest::Approx(s.action_oracle(s.bvp->Xf, 1.3)).epsilon(1e-10));
  CHECK(std::abs(r2.dS_dXf(0) - 2.0 * 0.7 / 1.3) < 1e-5);
  CHECK(std::abs(r2.dS_dXf(1) + 2.0 * 0.2 / 1.3) < 1e-5);
  CHECK(std::abs(r2.dS_dlambdaf + 2.0 * 0.53 / (2 * 1.3 * 1.3)) < 1e-5);
}

TEST_CASE("Hamilton-Jacobi relations for the oscillator") {
  const Scenario ho = build("harmonic-oscillator-hj");
  const double m = ho.param("m"), w = ho.param("omega");
  const BoundaryValueProblem& b = *ho.bvp;
  const double x0 = b.X0(0), xf = b.Xf(0), T = b.lambdaf - b.lambda0;
  const HJRelations r = verify_hj_relations(*ho.system, b);
  auto S = [&](double x, double t) { return oscillator_action(m, w, x0, x, t); };
  const double h = 1e-5;
  const double dSx = (S(xf + h, T) - S(xf - h, T)) / (2 * h);
  const double dSt = (S(xf, T + h) - S(xf, T - h)) / (2 * h);
  CHECK(r.action == doctest::Approx(S(xf, T)).epsilon(1e-9));
  CHECK(std::abs(r.dS_dXf(0) - dSx) < 1e-5);
  CHECK(std::abs(r.dS_dlambdaf - dSt) < 1e-5);
  CHECK(r.momentum_residual() < 5e-5);
  CHECK(r.energy_residual() < 5e-5);

  // Energy is conserved along the extremal of a lambda-independent system.
  const DiscretePath p = extremize(*ho.system, b);
  for (std::size_t i = 0; i < p.X.size(); ++i) {
    const Vec pi = momentum(*ho.system, p.X[i], p.V[i], p.lambda[i]);
    CHECK(std::abs(hamiltonian(*ho.system, p.X[i], pi, p.lambda[i]) - r.H_final) < 1e-6);
  }
}

TEST_CASE("Hamilton-Jacobi relations with explicit lambda dependence") {
  const LagrangianSystem nl = quartic(0.5);
  const BoundaryValueProblem b = bvp1(0.3, -0.2, 0.2, 1.7, 48);
  const HJRelations r = verify_hj_relations(nl, b);
  CHECK(r.momentum_residual() < 5e-5);
  CHECK(r.energy_residual() < 5e-5);
}

TEST_CASE("Hamilton-Jacobi equation for the assembled action") {
  const Scenario fp = build("free-particle-hj");
  CHECK(std::abs(hj_pde_residual(*fp.system, *fp.bvp)) < 1e-4);
  const Scenario ho = build("harmonic-oscillator-hj");
  CHECK(std::abs(hj_pde_residual(*ho.system, *ho.bvp)) < 1e-4);
  const LagrangianSystem nl = quartic(0.5);
  CHECK(std::abs(hj_pde_residual(nl, bvp1(0.3, -0.2, 0.2, 1.7, 48))) < 1e-4);
}

TEST_CASE("invalid problems and failed iterations") {
  const LagrangianSystem fp = free_particle(1, 1.0);
  CHECK_THROWS_AS(extremize(fp, bvp1(0, 1, 1, 1)), BadParameter);
  CHECK_THROWS_AS(extremize(fp, bvp1(0, 1, 1, 0.5)), BadParameter);
  CHECK_THROWS_AS(extremize(fp, bvp1(0, 1, 0, 1, 7)), BadParameter);
  BoundaryValueProblem mismatch = bvp1(0, 1, 0, 1);
  mismatch.Xf = Vec::Zero(2);
  CHECK_THROWS_AS(mismatch.validate(), BadParameter);
  CHECK_NOTHROW(bvp1(0, 1, 0, 1, 8).validate());

  ExtremizeOptions one;
  one.max_iterations = 1;
  const LagrangianSystem nl = quartic(0.0);
  const BoundaryValueProblem b = bvp1(1.5, -1.5, 0.0, 2.0, 32);
  try {
    extremize(nl, b, one);
    FAIL("expected NoConvergence");
  } catch (const NoConvergence& e) {
    CHECK(e.best_residual() > 1e-8);
    CHECK(std::isfinite(e.best_residual()));
  }
  CHECK_THROWS_AS(verify_hj_relations(fp, bvp1(0, 1, 0, -1)), BadParameter);
}

TEST_CASE("scenario parameter checks") {
  CHECK_THROWS_AS(build("harmonic-oscillator-hj", {{"lambdaf", {3.2}}}), BadParameter);
  CHECK_THROWS_AS(build("free-particle-hj", {{"nodes", {4}}}), BadParameter);
  CHECK_THROWS_AS(build("free-particle-hj", {{"lambdaf", {-1}}}), BadParameter);
}
