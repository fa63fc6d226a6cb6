#pragma once

#include "bohm/core.hpp"
#include "bohm/report.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace bohm {

/// A Lagrangian L(X, Xdot, lambda) on an n-dimensional configuration space.
/// Partial derivatives, the momentum map and the Hamiltonian are optional;
/// finite differences and a Legendre solve stand in for missing ones.
struct LagrangianSystem {
  int dim = 1;
  std::function<double(const Vec& X, const Vec& Xdot, double lambda)> lagrangian;
  // (dL/dX, dL/dXdot)
  std::function<std::pair<Vec, Vec>(const Vec& X, const Vec& Xdot, double lambda)> partials;
  std::function<double(const Vec& X, const Vec& p, double lambda)> hamiltonian;
};

struct BoundaryValueProblem {
  Vec X0;
  Vec Xf;
  double lambda0 = 0.0;
  double lambdaf = 1.0;
  int nodes = 64;  // interior nodes

  // Throws BadParameter unless lambdaf > lambda0 and nodes >= 8.
  void validate() const;
};

/// C1 piecewise-cubic Hermite path on a uniform lambda grid: node positions
/// and node velocities, endpoints included.
struct DiscretePath {
  std::vector<double> lambda;
  std::vector<Vec> X;
  std::vector<Vec> V;
  double el_residual = 0.0;  // max |dS_d/dq| / h over free DOFs
  int iterations = 0;

  double step() const { return lambda[1] - lambda[0]; }
  Vec position(double l) const;
  Vec velocity(double l) const;

  static DiscretePath straight_line(const BoundaryValueProblem& bvp);
  static DiscretePath from_functions(const BoundaryValueProblem& bvp,
                                     const std::function<Vec(double)>& x,
                                     const std::function<Vec(double)>& v);
};

/// Five-point Gauss-Legendre quadrature of L on every element.
double action_value(const LagrangianSystem& sys, const DiscretePath& path);

/// Gradient of the discrete action with respect to the free DOFs
/// (interior positions, all velocities).
Vec discrete_action_gradient(const LagrangianSystem& sys, const DiscretePath& path);

struct ExtremizeOptions {
  int max_iterations = 60;
  double tolerance = 1e-10;
};

/// Stationary path of the discretized action by Newton iteration with a
/// backtracking line search. Throws NoConvergence with the best residual.
DiscretePath extremize(const LagrangianSystem& sys, const BoundaryValueProblem& bvp,
                       const ExtremizeOptions& opts = {}, const DiscretePath* initial = nullptr);

Vec momentum(const LagrangianSystem& sys, const Vec& X, const Vec& Xdot, double lambda);
double hamiltonian(const LagrangianSystem& sys, const Vec& X, const Vec& p, double lambda);

/// dS/dX_f against p(lambda_f) and dS/dlambda_f against -H(lambda_f).
/// Endpoint derivatives of S are central differences of re-extremized
/// actions with one Richardson step (delta, delta/2).
struct HJRelations {
  Point endpoint;  // (X_f, lambda_f)
  double action = 0.0;
  Vec dS_dXf;
  Vec p_final;
  double dS_dlambdaf = 0.0;
  double H_final = 0.0;

  double momentum_residual() const { return (dS_dXf - p_final).cwiseAbs().maxCoeff(); }
  double energy_residual() const { return std::abs(dS_dlambdaf + H_final); }
  ResidualReport report() const;
};

HJRelations verify_hj_relations(const LagrangianSystem& sys, const BoundaryValueProblem& bvp,
                                double delta = 1e-4);

/// dS/dlambda_f + H(X_f, dS/dX_f, lambda_f) for the action function S
/// assembled from extremals at neighbouring endpoints.
double hj_pde_residual(const LagrangianSystem& sys, const BoundaryValueProblem& bvp, double delta = 1e-3);

}  // namespace bohm
