#include "bohm/hj_foundation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace bohm {
namespace {

// Gauss-Legendre, 5 points, mapped to [0, 1].
constexpr std::array<double, 5> kGaussS{0.5 - 0.4530899229693320, 0.5 - 0.2692346550528416, 0.5,
                                        0.5 + 0.2692346550528416, 0.5 + 0.4530899229693320};
constexpr std::array<double, 5> kGaussW{0.1184634425280945, 0.2393143352496832, 0.2844444444444444,
                                        0.2393143352496832, 0.1184634425280945};

// Hermite shape functions on [0,1] and their s-derivatives.
struct Shape {
  std::array<double, 4> phi;   // multiplies X_k, V_k, X_{k+1}, V_{k+1} in X(lambda)
  std::array<double, 4> dphi;  // same for Xdot(lambda)
};

Shape hermite(double s, double h) {
  const double s2 = s * s, s3 = s2 * s;
  Shape sh;
  sh.phi = {2 * s3 - 3 * s2 + 1, h * (s3 - 2 * s2 + s), -2 * s3 + 3 * s2, h * (s3 - s2)};
  sh.dphi = {(6 * s2 - 6 * s) / h, 3 * s2 - 4 * s + 1, (-6 * s2 + 6 * s) / h, 3 * s2 - 2 * s};
  return sh;
}


std::pair<Vec, Vec> lagrangian_partials(const LagrangianSystem& sys, const Vec& X, const Vec& V, double l) {
  if (sys.partials) return sys.partials(X, V, l);
  const int n = sys.dim;
  Vec z(2 * n);
  z << X, V;
  auto L = [&](const Vec& w) { return sys.lagrangian(w.head(n), w.tail(n), l); };
  Vec g(2 * n);
  for (int i = 0; i < 2 * n; ++i) {
    const double h = 1e-3 * std::max(1.0, std::abs(z(i)));
    Vec a = z, b = z, c = z, d = z;
    a(i) += 2 * h; b(i) += h; c(i) -= h; d(i) -= 2 * h;
    g(i) = (-L(a) + 8 * L(b) - 8 * L(c) + L(d)) / (12 * h);
  }
  return {g.head(n), g.tail(n)};
}

Mat lagrangian_hessian(const LagrangianSystem& sys, const Vec& X, const Vec& V, double l) {
  const int n = sys.dim;
  Vec z(2 * n);
  z << X, V;
  auto grad = [&](const Vec& w) {
    auto [gx, gv] = lagrangian_partials(sys, w.head(n), w.tail(n), l);
    Vec g(2 * n);
    g << gx, gv;
    return g;
  };
  Mat H(2 * n, 2 * n);
  for (int i = 0; i < 2 * n; ++i) {
    const double h = 1e-4 * std::max(1.0, std::abs(z(i)));
    Vec a = z, b = z;
    a(i) += h;
    b(i) -= h;
    H.col(i) = (grad(a) - grad(b)) / (2 * h);
  }
  return 0.5 * (H + H.transpose());
}

// Global index layout: node 0 -> V; interior node j -> X_j then V_j; last node -> V.
struct DofMap {
  int n;
  int nodes;  // total nodes, endpoints included

  int size() const { return 2 * n * (nodes - 1); }
  int x_index(int j) const { return (j == 0 || j == nodes - 1) ? -1 : n + (j - 1) * 2 * n; }
  int v_index(int j) const {
    if (j == 0) return 0;
    if (j == nodes - 1) return n + (nodes - 2) * 2 * n;
    return n + (j - 1) * 2 * n + n;
  }
  // Local slot a (0: X_k, 1: V_k, 2: X_{k+1}, 3: V_{k+1}) of element k.
  int slot(int k, int a) const {
    const int j = k + a / 2;
    return a % 2 == 0 ? x_index(j) : v_index(j);
  }
};

Vec pack(const DiscretePath& p, const DofMap& m) {
  Vec q(m.size());
  for (int j = 0; j < m.nodes; ++j) {
    if (m.x_index(j) >= 0) q.segment(m.x_index(j), m.n) = p.X[j];
    q.segment(m.v_index(j), m.n) = p.V[j];
  }
  return q;
}

void unpack(const Vec& q, const DofMap& m, DiscretePath& p) {
  for (int j = 0; j < m.nodes; ++j) {
    if (m.x_index(j) >= 0) p.X[j] = q.segment(m.x_index(j), m.n);
    p.V[j] = q.segment(m.v_index(j), m.n);
  }
}

// Position and velocity at quadrature point s of element k.
std::pair<Vec, Vec> evaluate(const DiscretePath& p, int k, const Shape& sh) {
  const Vec x = sh.phi[0] * p.X[k] + sh.phi[1] * p.V[k] + sh.phi[2] * p.X[k + 1] + sh.phi[3] * p.V[k + 1];
  const Vec v = sh.dphi[0] * p.X[k] + sh.dphi[1] * p.V[k] + sh.dphi[2] * p.X[k + 1] + sh.dphi[3] * p.V[k + 1];
  return {x, v};
}

void assemble(const LagrangianSystem& sys, const DiscretePath& p, const DofMap& m, Vec& g, Mat* H) {
  const int n = m.n;
  const double h = p.step();
  g = Vec::Zero(m.size());
  if (H) *H = Mat::Zero(m.size(), m.size());
  for (int k = 0; k + 1 < m.nodes; ++k) {
    for (std::size_t q = 0; q < kGaussS.size(); ++q) {
      const Shape sh = hermite(kGaussS[q], h);
      const double w = kGaussW[q] * h;
      const double l = p.lambda[k] + kGaussS[q] * h;
      const auto [x, v] = evaluate(p, k, sh);
      const auto [Lx, Lv] = lagrangian_partials(sys, x, v, l);
      for (int a = 0; a < 4; ++a) {
        const int ia = m.slot(k, a);
        if (ia < 0) continue;
        g.segment(ia, n) += w * (sh.phi[a] * Lx + sh.dphi[a] * Lv);
      }
      if (!H) continue;
      const Mat L2 = lagrangian_hessian(sys, x, v, l);
      const Mat Lxx = L2.topLeftCorner(n, n), Lxv = L2.topRightCorner(n, n);
      const Mat Lvx = L2.bottomLeftCorner(n, n), Lvv = L2.bottomRightCorner(n, n);
      for (int a = 0; a < 4; ++a) {
        const int ia = m.slot(k, a);
        if (ia < 0) continue;
        for (int b = 0; b < 4; ++b) {
          const int ib = m.slot(k, b);
          if (ib < 0) continue;
          H->block(ia, ib, n, n) += w * (sh.phi[a] * sh.phi[b] * Lxx + sh.phi[a] * sh.dphi[b] * Lxv +
                                         sh.dphi[a] * sh.phi[b] * Lvx + sh.dphi[a] * sh.dphi[b] * Lvv);
        }
      }
    }
  }
}

DiscretePath grid(const BoundaryValueProblem& bvp) {
  DiscretePath p;
  const int total = bvp.nodes + 2;
  p.lambda.resize(total);
  for (int j = 0; j < total; ++j)
    p.lambda[j] = bvp.lambda0 + (bvp.lambdaf - bvp.lambda0) * j / (total - 1);
  p.X.assign(total, Vec::Zero(bvp.X0.size()));
  p.V.assign(total, Vec::Zero(bvp.X0.size()));
  return p;
}

double action_at(const LagrangianSystem& sys, const BoundaryValueProblem& bvp, const DiscretePath* warm) {
  return action_value(sys, extremize(sys, bvp, {}, warm));
}

}  // namespace

void BoundaryValueProblem::validate() const {
  if (!(lambdaf > lambda0)) throw BadParameter("lambdaf must exceed lambda0");
  if (nodes < 8) throw BadParameter("at least 8 interior nodes required");
  if (X0.size() != Xf.size() || X0.size() == 0) throw BadParameter("endpoint dimensions differ");
}

Vec DiscretePath::position(double l) const {
  const double h = step();
  const int k = std::clamp(static_cast<int>((l - lambda.front()) / h), 0, static_cast<int>(lambda.size()) - 2);
  const Shape sh = hermite((l - lambda[k]) / h, h);
  return evaluate(*this, k, sh).first;
}

Vec DiscretePath::velocity(double l) const {
  const double h = step();
  const int k = std::clamp(static_cast<int>((l - lambda.front()) / h), 0, static_cast<int>(lambda.size()) - 2);
  const Shape sh = hermite((l - lambda[k]) / h, h);
  return evaluate(*this, k, sh).second;
}

DiscretePath DiscretePath::straight_line(const BoundaryValueProblem& bvp) {
  bvp.validate();
  DiscretePath p = grid(bvp);
  const double T = bvp.lambdaf - bvp.lambda0;
  const Vec v = (bvp.Xf - bvp.X0) / T;
  for (std::size_t j = 0; j < p.lambda.size(); ++j) {
    p.X[j] = bvp.X0 + v * (p.lambda[j] - bvp.lambda0);
    p.V[j] = v;
  }
  return p;
}

DiscretePath DiscretePath::from_functions(const BoundaryValueProblem& bvp, const std::function<Vec(double)>& x,
                                          const std::function<Vec(double)>& v) {
  bvp.validate();
  DiscretePath p = grid(bvp);
  for (std::size_t j = 0; j < p.lambda.size(); ++j) {
    p.X[j] = x(p.lambda[j]);
    p.V[j] = v(p.lambda[j]);
  }
  p.X.front() = bvp.X0;
  p.X.back() = bvp.Xf;
  return p;
}

double action_value(const LagrangianSystem& sys, const DiscretePath& path) {
  const double h = path.step();
  double S = 0.0;
  for (std::size_t k = 0; k + 1 < path.lambda.size(); ++k) {
    for (std::size_t q = 0; q < kGaussS.size(); ++q) {
      const Shape sh = hermite(kGaussS[q], h);
      const auto [x, v] = evaluate(path, static_cast<int>(k), sh);
      S += kGaussW[q] * h * sys.lagrangian(x, v, path.lambda[k] + kGaussS[q] * h);
    }
  }
  return S;
}

Vec discrete_action_gradient(const LagrangianSystem& sys, const DiscretePath& path) {
  const DofMap m{sys.dim, static_cast<int>(path.lambda.size())};
  Vec g;
  assemble(sys, path, m, g, nullptr);
  return g;
}

DiscretePath extremize(const LagrangianSystem& sys, const BoundaryValueProblem& bvp, const ExtremizeOptions& opts,
                       const DiscretePath* initial) {
  bvp.validate();
  if (bvp.X0.size() != sys.dim) throw BadParameter("endpoint dimension does not match the system");
  DiscretePath path = DiscretePath::straight_line(bvp);
  if (initial && initial->lambda.size() == path.lambda.size()) {
    // Warm start: reuse interior shape, keep the new grid and endpoints.
    for (std::size_t j = 1; j + 1 < path.lambda.size(); ++j) path.X[j] = initial->X[j];
    path.V = initial->V;
  }
  const DofMap m{sys.dim, static_cast<int>(path.lambda.size())};
  const double h = path.step();

  Vec q = pack(path, m);
  Vec g;
  Mat H;
  assemble(sys, path, m, g, &H);
  double residual = g.cwiseAbs().maxCoeff() / h;
  double best = residual;

  int it = 0;
  for (; it < opts.max_iterations && residual > opts.tolerance; ++it) {
    Eigen::PartialPivLU<Mat> lu(H);
    const Vec dq = lu.solve(-g);
    if (!dq.allFinite()) throw NoConvergence("singular Newton system", best);

    // Backtrack on the gradient norm.
    const double merit = g.norm();
    double t = 1.0;
    DiscretePath trial = path;
    Vec gt;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      unpack(q + t * dq, m, trial);
      assemble(sys, trial, m, gt, nullptr);
      if (gt.allFinite() && gt.norm() < merit) {
        improved = true;
        break;
      }
    }
    if (!improved) break;
    q += t * dq;
    path = trial;
    assemble(sys, path, m, g, &H);
    residual = g.cwiseAbs().maxCoeff() / h;
    best = std::min(best, residual);
  }

  path.el_residual = residual;
  path.iterations = it;
  // Floor of the finite-difference gradient; stationarity holds well below 1e-8.
  if (residual > std::max(opts.tolerance, 1e-8))
    throw NoConvergence("discrete Euler-Lagrange residual " + std::to_string(residual), best);
  return path;
}

Vec momentum(const LagrangianSystem& sys, const Vec& X, const Vec& Xdot, double lambda) {
  return lagrangian_partials(sys, X, Xdot, lambda).second;
}

double hamiltonian(const LagrangianSystem& sys, const Vec& X, const Vec& p, double lambda) {
  if (sys.hamiltonian) return sys.hamiltonian(X, p, lambda);
  // Legendre transform: solve dL/dXdot (X, V) = p for V by Newton.
  const int n = sys.dim;
  Vec V = p;
  for (int it = 0; it < 50; ++it) {
    const Vec r = momentum(sys, X, V, lambda) - p;
    if (r.cwiseAbs().maxCoeff() < 1e-13) break;
    const Mat Lvv = lagrangian_hessian(sys, X, V, lambda).bottomRightCorner(n, n);
    V -= Lvv.partialPivLu().solve(r);
  }
  return p.dot(V) - sys.lagrangian(X, V, lambda);
}

ResidualReport HJRelations::report() const {
  ResidualReport r("hj_relations");
  for (Eigen::Index i = 0; i < dS_dXf.size(); ++i) r.add(endpoint, dS_dXf(i) - p_final(i));
  r.add(endpoint, dS_dlambdaf + H_final);
  return r;
}

HJRelations verify_hj_relations(const LagrangianSystem& sys, const BoundaryValueProblem& bvp, double delta) {
  const DiscretePath base = extremize(sys, bvp);
  HJRelations out;
  out.endpoint = Point(bvp.Xf.size() + 1);
  out.endpoint << bvp.Xf, bvp.lambdaf;
  out.action = action_value(sys, base);
  out.p_final = momentum(sys, base.X.back(), base.V.back(), bvp.lambdaf);
  out.H_final = hamiltonian(sys, base.X.back(), out.p_final, bvp.lambdaf);

  auto central = [&](const std::function<double(double)>& S, double d) { return (S(d) - S(-d)) / (2.0 * d); };
  auto richardson = [&](const std::function<double(double)>& S) {
    return (4.0 * central(S, 0.5 * delta) - central(S, delta)) / 3.0;
  };

  out.dS_dXf = Vec(bvp.Xf.size());
  for (Eigen::Index i = 0; i < bvp.Xf.size(); ++i) {
    out.dS_dXf(i) = richardson([&](double d) {
      BoundaryValueProblem b = bvp;
      b.Xf(i) += d;
      return action_at(sys, b, &base);
    });
  }
  out.dS_dlambdaf = richardson([&](double d) {
    BoundaryValueProblem b = bvp;
    b.lambdaf += d;
    return action_at(sys, b, &base);
  });
  return out;
}

double hj_pde_residual(const LagrangianSystem& sys, const BoundaryValueProblem& bvp, double delta) {
  const DiscretePath base = extremize(sys, bvp);
  // Fourth-order central stencil on neighbouring extremal actions.
  auto derivative = [&](const std::function<double(double)>& S) {
    return (-S(2 * delta) + 8 * S(delta) - 8 * S(-delta) + S(-2 * delta)) / (12 * delta);
  };
  Vec dS_dX(bvp.Xf.size());
  for (Eigen::Index i = 0; i < bvp.Xf.size(); ++i) {
    dS_dX(i) = derivative([&](double d) {
      BoundaryValueProblem b = bvp;
      b.Xf(i) += d;
      return action_at(sys, b, &base);
    });
  }
  const double dS_dl = derivative([&](double d) {
    BoundaryValueProblem b = bvp;
    b.lambdaf += d;
    return action_at(sys, b, &base);
  });
  return dS_dl + hamiltonian(sys, bvp.Xf, dS_dX, bvp.lambdaf);
}

}  // namespace bohm
