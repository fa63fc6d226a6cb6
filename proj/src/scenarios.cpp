#include "bohm/scenarios.hpp"

#include "bohm/pilot_wave.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace bohm {
namespace {

using Builder = Scenario (*)(const ParamMap&);

ParamMap resolve(const std::string& scenario, ParamMap defaults, const ParamMap& overrides) {
  for (const auto& [key, value] : overrides) {
    auto it = defaults.find(key);
    if (it == defaults.end()) throw BadParameter(scenario + ": unknown parameter '" + key + "'");
    if (value.empty()) throw BadParameter(scenario + ": parameter '" + key + "' is empty");
    it->second = value;
  }
  return defaults;
}

double scalar(const ParamMap& p, const std::string& key) {
  const auto& v = p.at(key);
  if (v.size() != 1) throw BadParameter("parameter '" + key + "' must be a scalar");
  return v.front();
}

// Vector parameter padded with zeros to length n.
Vec padded(const ParamMap& p, const std::string& key, int n) {
  const auto& v = p.at(key);
  if (static_cast<int>(v.size()) > n)
    throw BadParameter("parameter '" + key + "' has " + std::to_string(v.size()) + " components, at most " +
                       std::to_string(n) + " allowed");
  Vec out = Vec::Zero(n);
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

int dimension(const ParamMap& p, int min_dim) {
  const double d = scalar(p, "dim");
  if (d != std::floor(d) || d < min_dim || d > 11) throw BadParameter("dim out of range");
  return static_cast<int>(d);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw BadParameter(what);
}

// Deterministic scatter of seed points inside a box.
std::vector<Point> scatter(const Vec& lo, const Vec& hi, int count, const Point& fixed_mask) {
  std::vector<Point> seeds;
  for (int k = 0; k < count; ++k) {
    Point x(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
      const double s = 0.5 + 0.4 * std::sin(1.3 * (k + 1) * (i + 1) + 0.7 * i);
      x(i) = fixed_mask(i) != 0.0 ? lo(i) : lo(i) + s * (hi(i) - lo(i));
    }
    seeds.push_back(x);
  }
  return seeds;
}

Vec box(int dim, double t0, double t1, double s0, double s1, bool lo) {
  Vec v(dim);
  v(0) = lo ? t0 : t1;
  for (int i = 1; i < dim; ++i) v(i) = lo ? s0 : s1;
  return v;
}

// Linear phase S = p.x with constant rho = 1.
PolarField plane_wave(const Covector& p) {
  PolarField f;
  f.rho = constant_field(p.size(), 1.0);
  f.S.value = [p](const Point& x) { return p.dot(x); };
  f.S.gradient = [p](const Point&) { return p; };
  const Eigen::Index n = p.size();
  f.S.hessian = [n](const Point&) { return Mat::Zero(n, n).eval(); };
  return f;
}

Scenario minkowski_plane_wave(const ParamMap& overrides) {
  Scenario s;
  s.name = "minkowski-plane-wave";
  s.kind = ScenarioKind::relativistic;
  s.params = resolve(s.name, {{"dim", {4}}, {"m", {1}}, {"q", {0}}, {"k", {0.6, 0, 0}}, {"A", {0}}}, overrides);
  const int D = dimension(s.params, 2);
  const double m = scalar(s.params, "m"), q = scalar(s.params, "q");
  require(m > 0, "m must be positive");
  const Vec k = padded(s.params, "k", D - 1);
  const Vec A = padded(s.params, "A", D);

  BackgroundRel bg = minkowski(D, m, q);
  bg.gauge = [A](const Point&) { return A; };
  bg.gauge_jacobian = [D](const Point&) { return Mat::Zero(D, D).eval(); };

  const Vec Ps = k - q * A.tail(D - 1);
  const double E = std::sqrt(m * m + Ps.squaredNorm()) - q * A(0);
  Covector p(D);
  p << -E, k;
  s.params["E"] = {E};
  s.params["k"] = to_std(k);
  s.params["A"] = to_std(A);

  s.rel = bg;
  s.polar = plane_wave(p);
  s.psi = complex_field(*s.polar);

  Vec u(D);
  u << (E + q * A(0)) / m, Ps / m;
  s.trajectory_oracle = [u](const Point& x0, double l) { return (x0 + l * u).eval(); };

  s.region_lo = box(D, -2, 2, -3, 3, true);
  s.region_hi = box(D, -2, 2, -3, 3, false);
  s.seeds = scatter(s.region_lo, s.region_hi, 5, Vec::Zero(D));
  s.span = 10.0;
  s.law = VelocityLaw::quantum;
  s.tolerances = {{"classical_hj", 1e-9}, {"quantum_hj", 1e-9},  {"continuity", 1e-9},
                  {"quantum_potential", 1e-9}, {"linear_kg", 1e-9}, {"classical_field", 1e-9},
                  {"hamiltonian_constraint", 1e-9}, {"trajectory_endpoint", 1e-8}};
  return s;
}

Scenario minkowski_superposition(const ParamMap& overrides) {
  Scenario s;
  s.name = "minkowski-superposition";
  s.kind = ScenarioKind::relativistic;
  s.params = resolve(s.name,
                     {{"dim", {4}}, {"m", {1}}, {"k1", {0.6, 0, 0}}, {"k2", {-0.3, 0.5, 0}}, {"a", {1}}, {"b", {0.5}}},
                     overrides);
  const int D = dimension(s.params, 2);
  const double m = scalar(s.params, "m"), a = scalar(s.params, "a"), b = scalar(s.params, "b");
  require(m > 0, "m must be positive");
  require(std::abs(std::abs(a) - std::abs(b)) > 1e-3, "|a| and |b| must differ so the superposition has no nodes");
  const Vec k1 = padded(s.params, "k1", D - 1), k2 = padded(s.params, "k2", D - 1);
  require((k1 - k2).norm() > 1e-12, "k1 and k2 must differ");
  Covector p1(D), p2(D);
  p1 << -std::sqrt(m * m + k1.squaredNorm()), k1;
  p2 << -std::sqrt(m * m + k2.squaredNorm()), k2;
  s.params["k1"] = to_std(k1);
  s.params["k2"] = to_std(k2);
  s.params["E1"] = {-p1(0)};
  s.params["E2"] = {-p2(0)};

  const Complex I(0, 1);
  ComplexField psi;
  psi.value = [=](const Point& x) { return a * std::exp(I * p1.dot(x)) + b * std::exp(I * p2.dot(x)); };
  psi.gradient = [=](const Point& x) {
    return (CVec(I * a * std::exp(I * p1.dot(x)) * p1.cast<Complex>()) +
            CVec(I * b * std::exp(I * p2.dot(x)) * p2.cast<Complex>()))
        .eval();
  };
  psi.hessian = [=](const Point& x) {
    return (CMat(-a * std::exp(I * p1.dot(x)) * (p1 * p1.transpose()).cast<Complex>()) +
            CMat(-b * std::exp(I * p2.dot(x)) * (p2 * p2.transpose()).cast<Complex>()))
        .eval();
  };

  s.rel = minkowski(D, m, 0.0);
  s.psi = psi;
  s.polar = polar_field(psi);
  s.region_lo = box(D, -2, 2, -3, 3, true);
  s.region_hi = box(D, -2, 2, -3, 3, false);
  // m^2 + Q turns negative in parts of the interference pattern, where the
  // quantum law has no timelike velocity; seeds must be chosen by the caller.
  s.span = 5.0;
  s.law = VelocityLaw::quantum;
  // classical_field is expected to be violated: it is a lower bound here.
  s.tolerances = {{"linear_kg", 1e-9}, {"classical_field_min", 1e-2}};
  return s;
}

Scenario flat_nc_plane_wave(const ParamMap& overrides) {
  Scenario s;
  s.name = "flat-nc-plane-wave";
  s.kind = ScenarioKind::newton_cartan;
  s.params = resolve(s.name, {{"dim", {2}}, {"m", {1}}, {"k", {0.5}}}, overrides);
  const int D = dimension(s.params, 2);
  const double m = scalar(s.params, "m");
  require(m > 0, "m must be positive");
  const Vec k = padded(s.params, "k", D - 1);
  const double E = k.squaredNorm() / (2 * m);
  s.params["k"] = to_std(k);
  s.params["E"] = {E};
  Covector p(D);
  p << -E, k;
  s.nc = flat_nc(D, m, 0.0);
  s.polar = plane_wave(p);
  s.psi = complex_field(*s.polar);
  Vec u(D);
  u << 1.0, k / m;
  s.trajectory_oracle = [u](const Point& x0, double l) { return (x0 + l * u).eval(); };
  s.region_lo = box(D, 0, 5, -3, 3, true);
  s.region_hi = box(D, 0, 5, -3, 3, false);
  s.seeds = scatter(s.region_lo, s.region_hi, 5, unit_vector(D, 0));
  s.span = 5.0;
  s.law = VelocityLaw::quantum;
  s.tolerances = {{"nc_classical_hj", 1e-10}, {"nc_quantum_hj", 1e-10},      {"nc_continuity", 1e-10},
                  {"nc_schrodinger", 1e-9},   {"nc_classical_field", 1e-9}, {"hamiltonian_constraint", 1e-9},
                  {"trajectory_endpoint", 1e-8}};
  return s;
}

Scenario flat_nc_gaussian_packet(const ParamMap& overrides) {
  Scenario s;
  s.name = "flat-nc-gaussian-packet";
  s.kind = ScenarioKind::newton_cartan;
  s.params = resolve(s.name, {{"m", {1}}, {"sigma0", {1}}}, overrides);
  const double m = scalar(s.params, "m"), s0 = scalar(s.params, "sigma0");
  require(m > 0, "m must be positive");
  require(s0 > 0, "sigma0 must be positive");
  s.params["dim"] = {2};

  // ln psi = -1/4 ln(2 pi s0^2) - 1/2 ln(1 + i tau) - x^2 / (4 s0^2 (1 + i tau)), tau = beta t.
  const double beta = 1.0 / (2 * m * s0 * s0);
  const Complex I(0, 1);
  const double c0 = -0.25 * std::log(2 * std::numbers::pi * s0 * s0);
  auto zeta = [=](double t) { return 1.0 + I * beta * t; };
  auto log_derivs = [=](const Point& X, CVec& w, CMat& L2) {
    const double x = X(1);
    const Complex z = zeta(X(0));
    w.resize(2);
    L2.resize(2, 2);
    w(0) = -I * beta / (2.0 * z) + I * beta * x * x / (4 * s0 * s0 * z * z);
    w(1) = -x / (2 * s0 * s0 * z);
    L2(0, 0) = -beta * beta / (2.0 * z * z) + beta * beta * x * x / (2 * s0 * s0 * z * z * z);
    L2(0, 1) = L2(1, 0) = I * beta * x / (2 * s0 * s0 * z * z);
    L2(1, 1) = -1.0 / (2 * s0 * s0 * z);
  };
  ComplexField psi;
  psi.value = [=](const Point& X) {
    const Complex z = zeta(X(0));
    return std::exp(c0 - 0.5 * std::log(z) - X(1) * X(1) / (4 * s0 * s0 * z));
  };
  psi.gradient = [=](const Point& X) {
    CVec w;
    CMat L2;
    log_derivs(X, w, L2);
    return CVec(psi.value(X) * w);
  };
  psi.hessian = [=](const Point& X) {
    CVec w;
    CMat L2;
    log_derivs(X, w, L2);
    return CMat(psi.value(X) * (L2 + w * w.transpose()));
  };

  s.nc = flat_nc(2, m, 0.0);
  s.psi = psi;
  s.polar = polar_field(psi);
  auto sigma = [=](double t) { return s0 * std::sqrt(1 + beta * beta * t * t); };
  s.trajectory_oracle = [sigma](const Point& x0, double l) {
    Point x(2);
    x << x0(0) + l, x0(1) * sigma(x0(0) + l) / sigma(x0(0));
    return x;
  };
  s.region_lo = Vec(2);
  s.region_hi = Vec(2);
  s.region_lo << 0, -4 * s0;
  s.region_hi << 5, 4 * s0;
  for (double x0 : {-1.5, -0.75, 0.3, 0.9, 2.0}) {
    Point p(2);
    p << 0, x0 * s0;
    s.seeds.push_back(p);
  }
  s.span = 5.0;
  s.law = VelocityLaw::quantum;
  s.tolerances = {{"nc_quantum_hj", 1e-6},      {"nc_continuity", 1e-6},      {"nc_schrodinger", 1e-9},
                  {"hamiltonian_constraint", 1e-6}, {"trajectory_relative", 1e-4}};
  return s;
}

Scenario curved_diagonal(const ParamMap& overrides) {
  Scenario s;
  s.name = "curved-diagonal";
  s.kind = ScenarioKind::relativistic;
  s.params = resolve(s.name,
                     {{"dim", {4}}, {"m", {1}}, {"E", {2}}, {"eps", {0.1}}, {"kperp", {0}}, {"conserved_rho", {0}}},
                     overrides);
  const int D = dimension(s.params, 3);
  const double m = scalar(s.params, "m"), E = scalar(s.params, "E"), eps = scalar(s.params, "eps");
  const bool conserved = scalar(s.params, "conserved_rho") != 0.0;
  require(m > 0, "m must be positive");
  require(E > 0, "E must be positive");
  const Vec kp = padded(s.params, "kperp", D - 2);
  s.params["kperp"] = to_std(kp);
  const double K2 = E * E - kp.squaredNorm();

  const double xlo = -2.0, xhi = 2.0;
  for (double x : {xlo, xhi}) {
    const double Om = 1 + eps * x;
    require(Om > 0.05, "conformal factor must stay positive on the region");
    require(K2 - m * m * Om * Om > 1e-3, "E too small: the phase has a turning point inside the region");
  }

  auto Omega = [eps](const Point& x) { return 1.0 + eps * x(1); };
  BackgroundRel bg;
  bg.dim = D;
  bg.mass = m;
  bg.charge = 0.0;
  bg.metric = [D, Omega](const Point& x) {
    Mat g = Mat::Identity(D, D);
    g(0, 0) = -1.0;
    const double Om = Omega(x);
    return (Om * Om * g).eval();
  };
  s.rel = bg;

  auto Wp = [=](double Om) { return std::sqrt(K2 - m * m * Om * Om); };
  auto Wpp = [=](double Om) { return -m * m * eps * Om / Wp(Om); };
  const double K = std::sqrt(K2);
  // W(x1) = int_0^x1 W' as a difference of the antiderivative, arranged so
  // the 1/eps prefactor multiplies an O(eps) quantity computed without loss.
  auto W = [=](double x1) {
    if (std::abs(eps) < 1e-14) return Wp(1.0) * x1;
    const double a = m * (1 + eps * x1) / K, b = m / K;
    const double ra = std::sqrt(1 - a * a), rb = std::sqrt(1 - b * b);
    const double arc = std::asin(a * rb - b * ra);
    return 0.5 * K2 * (a * ra - b * rb + arc) / (eps * m);
  };
  PolarField f;
  f.S.value = [=](const Point& x) { return -E * x(0) + W(x(1)) + kp.dot(x.tail(D - 2)); };
  f.S.gradient = [=](const Point& x) {
    Vec g(D);
    g << -E, Wp(Omega(x)), kp;
    return g;
  };
  f.S.hessian = [=](const Point& x) {
    Mat H = Mat::Zero(D, D);
    H(1, 1) = Wpp(Omega(x));
    return H;
  };
  if (conserved) {
    // rho = Omega^(2-D) / W' keeps d(sqrt(-g) rho g^-1 dS) = 0.
    auto rho = [=](double Om) { return std::pow(Om, 2 - D) / Wp(Om); };
    auto dlog = [=](double Om) { return (2 - D) * eps / Om - Wpp(Om) / Wp(Om); };
    auto d2log = [=](double Om) {
      const double w1 = Wp(Om), w2 = Wpp(Om);
      const double w3 = -m * m * eps * eps / w1 + m * m * eps * Om * w2 / (w1 * w1);
      return -(2 - D) * eps * eps / (Om * Om) - (w3 * w1 - w2 * w2) / (w1 * w1);
    };
    f.rho.value = [=](const Point& x) { return rho(Omega(x)); };
    f.rho.gradient = [=](const Point& x) {
      Vec g = Vec::Zero(D);
      g(1) = rho(Omega(x)) * dlog(Omega(x));
      return g;
    };
    f.rho.hessian = [=](const Point& x) {
      Mat H = Mat::Zero(D, D);
      const double Om = Omega(x), d1 = dlog(Om);
      H(1, 1) = rho(Om) * (d2log(Om) + d1 * d1);
      return H;
    };
  } else {
    f.rho = constant_field(D, 1.0);
  }
  s.polar = f;
  s.psi = complex_field(f);

  s.region_lo = Vec::Constant(D, -1.0);
  s.region_hi = Vec::Constant(D, 1.0);
  s.region_lo(1) = xlo;
  s.region_hi(1) = xhi;
  s.seeds = scatter(s.region_lo, s.region_hi, 5, Vec::Zero(D));
  s.span = 5.0;
  s.law = VelocityLaw::classical;
  s.tolerances = {{"classical_hj", 1e-10}, {"geodesic", 1e-6}};
  if (conserved)
    s.tolerances["continuity"] = 1e-7;
  else
    s.tolerances["quantum_hj"] = 1e-10;
  return s;
}

Scenario nc_nontrivial_m(const ParamMap& overrides) {
  Scenario s;
  s.name = "nc-nontrivial-M";
  s.kind = ScenarioKind::newton_cartan;
  s.params = resolve(
      s.name, {{"dim", {2}}, {"m", {1}}, {"q", {0.5}}, {"M_t", {0.3}}, {"M_x", {0}}, {"phi", {0.2}}, {"k", {0.4}}},
      overrides);
  const int D = dimension(s.params, 2);
  const double m = scalar(s.params, "m"), q = scalar(s.params, "q");
  const double Mt = scalar(s.params, "M_t"), phi = scalar(s.params, "phi");
  const Vec Mx = padded(s.params, "M_x", D - 1), k = padded(s.params, "k", D - 1);
  require(m > 0, "m must be positive");
  const double c = m - q * phi;
  require(std::abs(c) > 1e-6, "m - q phi must not vanish");
  s.params["M_x"] = to_std(Mx);
  s.params["k"] = to_std(k);

  Covector M(D);
  M << Mt, Mx;
  NCBackground bg = flat_nc(D, m, q);
  bg.mass_gauge = [M](const Point&) { return M; };
  bg.phi_gauge = [phi](const Point&) { return phi; };
  s.nc = bg;

  // P = dS - qA with A = -phi M; on shell 2c vhat.P - P h P - 2 c^2 Phi = 0.
  const double Phi = Mt + 0.5 * Mx.squaredNorm();
  const Vec Ps = k + q * phi * Mx;
  const double E = q * phi * Mt + Mx.dot(Ps) + (Ps.squaredNorm() + 2 * c * c * Phi) / (2 * c);
  s.params["E"] = {E};
  s.params["Phi"] = {Phi};
  Covector p(D);
  p << -E, k;
  s.polar = plane_wave(p);
  s.psi = complex_field(*s.polar);

  Vec u(D);
  u << 1.0, Ps / c + Mx;
  s.trajectory_oracle = [u](const Point& x0, double l) { return (x0 + l * u).eval(); };
  s.region_lo = box(D, 0, 5, -3, 3, true);
  s.region_hi = box(D, 0, 5, -3, 3, false);
  s.seeds = scatter(s.region_lo, s.region_hi, 5, unit_vector(D, 0));
  s.span = 5.0;
  s.law = VelocityLaw::quantum;
  s.tolerances = {{"nc_classical_hj", 1e-10}, {"nc_quantum_hj", 1e-10},      {"nc_continuity", 1e-10},
                  {"nc_schrodinger", 1e-9},   {"nc_classical_field", 1e-9}, {"hamiltonian_constraint", 1e-9},
                  {"ehat_identity", 1e-9},    {"trajectory_endpoint", 1e-8}};
  return s;
}

void hj_common(Scenario& s, const Vec& X0, const Vec& Xf, double l0, double lf, int nodes, double dx, double dl,
               double lf_cap) {
  BoundaryValueProblem bvp;
  bvp.X0 = X0;
  bvp.Xf = Xf;
  bvp.lambda0 = l0;
  bvp.lambdaf = lf;
  bvp.nodes = nodes;
  bvp.validate();
  s.bvp = bvp;
  const int n = static_cast<int>(X0.size());
  s.region_lo = Vec(n + 1);
  s.region_hi = Vec(n + 1);
  s.region_lo << (Xf.array() - dx).matrix(), std::max(lf - dl, l0 + 0.1 * (lf - l0));
  s.region_hi << (Xf.array() + dx).matrix(), std::min(lf + dl, lf_cap);
  s.tolerances = {{"hj_momentum", 5e-5}, {"hj_energy", 5e-5}, {"hj_pde", 1e-4}, {"el_residual", 1e-8}};
}

int node_count(const ParamMap& p) {
  const double n = scalar(p, "nodes");
  if (n != std::floor(n) || n < 8 || n > 4096) throw BadParameter("nodes must be an integer in [8, 4096]");
  return static_cast<int>(n);
}

Vec as_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

Scenario free_particle_hj(const ParamMap& overrides) {
  Scenario s;
  s.name = "free-particle-hj";
  s.kind = ScenarioKind::hj_foundation;
  s.params = resolve(s.name, {{"m", {1}}, {"X0", {0}}, {"Xf", {1}}, {"lambda0", {0}}, {"lambdaf", {1}}, {"nodes", {64}}},
                     overrides);
  const double m = scalar(s.params, "m");
  require(m > 0, "m must be positive");
  const Vec X0 = as_vec(s.params["X0"]), Xf = as_vec(s.params["Xf"]);
  require(X0.size() == Xf.size(), "X0 and Xf must have the same length");
  const double l0 = scalar(s.params, "lambda0"), lf = scalar(s.params, "lambdaf");
  require(lf > l0, "lambdaf must exceed lambda0");

  LagrangianSystem sys;
  sys.dim = static_cast<int>(X0.size());
  sys.lagrangian = [m](const Vec&, const Vec& v, double) { return 0.5 * m * v.squaredNorm(); };
  sys.partials = [m](const Vec& X, const Vec& v, double) {
    return std::pair<Vec, Vec>(Vec::Zero(X.size()), m * v);
  };
  sys.hamiltonian = [m](const Vec&, const Vec& p, double) { return p.squaredNorm() / (2 * m); };
  s.system = sys;
  s.path_oracle = [=](double l) { return (X0 + (Xf - X0) * (l - l0) / (lf - l0)).eval(); };
  s.action_oracle = [=](const Vec& xf, double lam) { return m * (xf - X0).squaredNorm() / (2 * (lam - l0)); };
  hj_common(s, X0, Xf, l0, lf, node_count(s.params), 0.5, 0.5, lf + 0.5);
  return s;
}

Scenario harmonic_oscillator_hj(const ParamMap& overrides) {
  Scenario s;
  s.name = "harmonic-oscillator-hj";
  s.kind = ScenarioKind::hj_foundation;
  s.params = resolve(s.name,
                     {{"m", {1}}, {"omega", {1}}, {"X0", {0.5}}, {"Xf", {0}}, {"lambda0", {0}}, {"lambdaf", {1.5}},
                      {"nodes", {64}}},
                     overrides);
  const double m = scalar(s.params, "m"), w = scalar(s.params, "omega");
  require(m > 0, "m must be positive");
  require(w > 0, "omega must be positive");
  const Vec X0 = as_vec(s.params["X0"]), Xf = as_vec(s.params["Xf"]);
  require(X0.size() == Xf.size(), "X0 and Xf must have the same length");
  const double l0 = scalar(s.params, "lambda0"), lf = scalar(s.params, "lambdaf");
  require(lf > l0, "lambdaf must exceed lambda0");
  require(w * (lf - l0) < std::numbers::pi, "omega (lambdaf - lambda0) must be below pi (conjugate point)");

  LagrangianSystem sys;
  sys.dim = static_cast<int>(X0.size());
  sys.lagrangian = [=](const Vec& X, const Vec& v, double) {
    return 0.5 * m * (v.squaredNorm() - w * w * X.squaredNorm());
  };
  sys.partials = [=](const Vec& X, const Vec& v, double) { return std::pair<Vec, Vec>(-m * w * w * X, m * v); };
  sys.hamiltonian = [=](const Vec& X, const Vec& p, double) {
    return p.squaredNorm() / (2 * m) + 0.5 * m * w * w * X.squaredNorm();
  };
  s.system = sys;
  s.path_oracle = [=](double l) {
    const double T = lf - l0;
    return ((X0 * std::sin(w * (T - (l - l0))) + Xf * std::sin(w * (l - l0))) / std::sin(w * T)).eval();
  };
  s.action_oracle = [=](const Vec& xf, double lam) {
    const double T = lam - l0;
    return m * w / (2 * std::sin(w * T)) *
           ((X0.squaredNorm() + xf.squaredNorm()) * std::cos(w * T) - 2 * X0.dot(xf));
  };
  hj_common(s, X0, Xf, l0, lf, node_count(s.params), 1.0, 1.0, l0 + 0.95 * std::numbers::pi / w);
  return s;
}

const std::map<std::string, Builder>& registry() {
  static const std::map<std::string, Builder> r = {
      {"minkowski-plane-wave", &minkowski_plane_wave},
      {"minkowski-superposition", &minkowski_superposition},
      {"flat-nc-plane-wave", &flat_nc_plane_wave},
      {"flat-nc-gaussian-packet", &flat_nc_gaussian_packet},
      {"curved-diagonal", &curved_diagonal},
      {"nc-nontrivial-M", &nc_nontrivial_m},
      {"free-particle-hj", &free_particle_hj},
      {"harmonic-oscillator-hj", &harmonic_oscillator_hj},
  };
  return r;
}

double rel_err(double a, double b, double scale = 1.0) {
  return std::abs(a - b) / std::max({1.0, scale, std::abs(a)});
}

template <class T>
double rel_err(const T& a, const T& b, double scale = 1.0) {
  double e = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    e = std::max(e, std::abs(a.data()[i] - b.data()[i]) / std::max({1.0, scale, std::abs(a.data()[i])}));
  return e;
}

void check_real(ResidualReport& r, const RealField& f, const Point& x, bool phase) {
  // A principal-branch phase is made locally continuous around x first.
  const double f0 = f(x);
  auto g = [&](const Point& y) {
    const double v = f(y);
    return phase ? f0 + std::remainder(v - f0, 2 * std::numbers::pi) : v;
  };
  // Rounding in the difference quotients scales with |f|.
  const double scale = std::abs(f0);
  if (f.has_analytic_gradient()) r.add(x, rel_err(f.grad(x), fd_gradient<double>(g, x, 1e-5), scale));
  if (f.has_analytic_hessian()) r.add(x, rel_err(f.hess(x), fd_hessian<double>(g, x, 1e-4), scale));
}

}  // namespace

const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::relativistic: return "relativistic";
    case ScenarioKind::newton_cartan: return "newton-cartan";
    case ScenarioKind::hj_foundation: return "hj-foundation";
  }
  return "?";
}

double Scenario::param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end() || it->second.size() != 1) throw BadParameter("no scalar parameter '" + key + "'");
  return it->second.front();
}

Vec Scenario::vector_param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw BadParameter("no parameter '" + key + "'");
  return as_vec(it->second);
}

GuidanceField Scenario::guidance() const {
  if (!polar || (!rel && !nc)) throw BadParameter(name + " has no guidance field");
  GuidanceField gf;
  if (rel)
    gf.background = *rel;
  else
    gf.background = *nc;
  gf.field = *polar;
  gf.law = law;
  return gf;
}

Scenario build(const std::string& name, const ParamMap& overrides) {
  auto it = registry().find(name);
  if (it == registry().end()) throw UnknownScenario("'" + name + "' is not in the registry");
  return it->second(overrides);
}

std::vector<std::string> registry_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : registry()) names.push_back(k);
  return names;
}

ResidualReport derivative_crosscheck(const Scenario& s, int points, std::uint64_t seed) {
  ResidualReport r("derivative_crosscheck", 1e-6);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto sample = [&](const Vec& lo, const Vec& hi) {
    Vec x(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) x(i) = lo(i) + uni(rng) * (hi(i) - lo(i));
    return x;
  };

  for (int k = 0; k < points; ++k) {
    if (s.kind == ScenarioKind::hj_foundation) {
      const auto& sys = *s.system;
      const int n = sys.dim;
      const Vec X = sample(Vec::Constant(n, -1.5), Vec::Constant(n, 1.5));
      const Vec V = sample(Vec::Constant(n, -1.5), Vec::Constant(n, 1.5));
      const double l = uni(rng);
      Vec z(2 * n);
      z << X, V;
      auto L = [&](const Point& w) { return sys.lagrangian(w.head(n), w.tail(n), l); };
      const Vec fd = fd_gradient<double>(L, z, 1e-5);
      const auto [Lx, Lv] = sys.partials(X, V, l);
      Vec an(2 * n);
      an << Lx, Lv;
      r.add(z, rel_err(an, fd));
      if (sys.hamiltonian) r.add(z, rel_err(sys.hamiltonian(X, Lv, l), Lv.dot(V) - sys.lagrangian(X, V, l)));
      continue;
    }
    const Point x = sample(s.region_lo, s.region_hi);
    if (s.psi) {
      const ComplexField& psi = *s.psi;
      const double scale = std::abs(psi(x));
      if (psi.has_analytic_gradient())
        r.add(x, rel_err(psi.grad(x), fd_gradient<Complex>(psi.value, x, 1e-5), scale));
      if (psi.has_analytic_hessian())
        r.add(x, rel_err(psi.hess(x), fd_hessian<Complex>(psi.value, x, 1e-4), scale));
    }
    if (s.polar) {
      check_real(r, s.polar->rho, x, false);
      check_real(r, s.polar->S, x, true);
    }
  }
  return r;
}

}  // namespace bohm
