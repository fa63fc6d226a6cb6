#include "bohm/pilot_wave.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace bohm {
namespace {

constexpr Complex kI{0.0, 1.0};

void require_density(double rho, const Point& x) {
  if (!(rho > kNodeEpsilon)) {
    std::string where;
    for (Eigen::Index i = 0; i < x.size(); ++i) where += (i ? "," : "") + std::to_string(x(i));
    throw NodeEncountered("rho = " + std::to_string(rho) + " at (" + where + ")");
  }
}

// Local jet of a polar field plus the background data at one point.
struct RelJet {
  MetricData md;
  Covector A;
  Mat dA;  // dA(M, N) = d_M A_N
  double rho;
  Vec grad_rho;
  Covector P;  // dS - qA
};

RelJet rel_jet(const BackgroundRel& bg, const PolarField& f, const Point& x) {
  RelJet j;
  j.md = metric_data(bg, x);
  j.A = gauge_field(bg, x);
  j.dA = gauge_jacobian(bg, x);
  j.rho = f.rho(x);
  j.grad_rho = f.rho.grad(x);
  j.P = f.S.grad(x) - bg.charge * j.A;
  return j;
}

// Complex jet of psi with its gauge-covariant derivative.
struct ComplexJet {
  MetricData md;
  Covector A;
  Mat dA;
  Complex psi;
  CVec grad;
  CMat hess;
  CVec D;  // D_N psi
};

ComplexJet complex_jet(const BackgroundRel& bg, const ComplexField& f, const Point& x) {
  ComplexJet j;
  j.md = metric_data(bg, x);
  j.A = gauge_field(bg, x);
  j.dA = gauge_jacobian(bg, x);
  j.psi = f(x);
  j.grad = f.grad(x);
  j.hess = f.hess(x);
  j.D = j.grad - kI * bg.charge * j.A.cast<Complex>() * j.psi;
  return j;
}

// (1/sqrt(-g)) D_M[ sqrt(-g) g^{MN} D_N psi ]
Complex covariant_laplacian(const BackgroundRel& bg, const ComplexJet& j) {
  const double q = bg.charge;
  const int n = bg.dim;
  Complex div = 0.0;
  for (int m = 0; m < n; ++m) {
    for (int k = 0; k < n; ++k) {
      const Complex dD = j.hess(m, k) - kI * q * (j.dA(m, k) * j.psi + j.A(k) * j.grad(m));
      div += j.md.g_inv(m, k) * dD;
    }
  }
  const CVec V = j.md.g_inv.cast<Complex>() * j.D;  // g^{MN} D_N psi
  Complex result = div + (j.md.div_densitized.cast<Complex>().transpose() * j.D)(0) / j.md.sqrt_minus_g;
  result -= kI * q * (j.A.cast<Complex>().transpose() * V)(0);
  return result;
}

enum class ClassicalFieldForm { derived, as_printed };

Complex classical_field(const BackgroundRel& bg, const ComplexField& f, const Point& x,
                        ClassicalFieldForm form) {
  const ComplexJet j = complex_jet(bg, f, x);
  require_density(std::norm(j.psi), x);
  const double q = bg.charge;
  const double m2 = bg.mass * bg.mass;
  const int n = bg.dim;
  const CMat ginv = j.md.g_inv.cast<Complex>();
  const Complex psi = j.psi;
  const Complex psib = std::conj(psi);

  const Complex t1 = 0.5 * covariant_laplacian(bg, j);
  const Complex t2 = (j.D.transpose() * ginv * j.D)(0) / (4.0 * psi);

  // chi_N = (D_N psi)^* = d_N psi* + i q A_N psi*
  const CVec chi = j.D.conjugate();
  const Complex chi_g_chi = (chi.transpose() * ginv * chi)(0);

  // (1/sqrt(-g)) D_M[ r sqrt(-g) g^{MN} chi_N ],  r = psi / psi*
  const Complex r = psi / psib;
  Complex div = (j.md.div_densitized.cast<Complex>().transpose() * chi)(0) * r / j.md.sqrt_minus_g;
  for (int m = 0; m < n; ++m) {
    const Complex dr = j.grad(m) / psib - psi * std::conj(j.grad(m)) / (psib * psib);
    for (int k = 0; k < n; ++k) {
      const Complex dchi =
          std::conj(j.hess(m, k)) + kI * q * (j.dA(m, k) * psib + j.A(k) * std::conj(j.grad(m)));
      div += j.md.g_inv(m, k) * (dr * chi(k) + r * dchi);
    }
  }
  div -= kI * q * r * (j.A.cast<Complex>().transpose() * ginv * chi)(0);
  const Complex t5 = -0.5 * div;

  if (form == ClassicalFieldForm::derived) {
    return t1 + t2 - m2 * psi - psi / (4.0 * psib * psib) * chi_g_chi + t5;
  }
  return t1 + t2 + m2 * psi - psi / (4.0 * psib) * chi_g_chi + t5;
}

struct NCJet {
  NCDerived d;
  NCGradients g;
  double c;  // m - q phi
};

NCJet nc_jet(const NCBackground& nc, const Point& x) {
  NCJet j;
  j.d = derive_nc(nc, x);
  j.g = nc_gradients(nc, x);
  j.c = nc.mass - nc.charge * j.d.phi;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------

Complex polar_compose(const PolarField& f, const Point& x) {
  return std::polar(std::sqrt(f.rho(x)), f.S(x));
}

PolarValue polar_decompose(const ComplexField& psi, const Point& x) {
  const Complex z = psi(x);
  if (!(std::abs(z) > kNodeEpsilon)) throw NodeEncountered("|psi| = " + std::to_string(std::abs(z)));
  return {std::norm(z), std::arg(z)};
}

PolarField polar_field(const ComplexField& psi) {
  PolarField f;
  f.rho.value = [psi](const Point& x) { return std::norm(psi(x)); };
  f.S.value = [psi](const Point& x) { return polar_decompose(psi, x).S; };

  // First and second logarithmic derivatives of psi.
  auto log_grad = [psi](const Point& x) {
    const Complex z = psi(x);
    require_density(std::norm(z), x);
    return CVec(psi.grad(x) / z);
  };
  f.rho.gradient = [psi, log_grad](const Point& x) {
    return Vec(2.0 * std::norm(psi(x)) * log_grad(x).real());
  };
  f.S.gradient = [log_grad](const Point& x) { return Vec(log_grad(x).imag()); };

  auto log_hess = [psi](const Point& x) {
    const Complex z = psi(x);
    require_density(std::norm(z), x);
    const CVec w = psi.grad(x) / z;
    return CMat(psi.hess(x) / z - w * w.transpose());
  };
  f.rho.hessian = [psi, log_grad, log_hess](const Point& x) {
    const double rho = std::norm(psi(x));
    const Vec a = log_grad(x).real();
    return Mat(2.0 * rho * log_hess(x).real() + 4.0 * rho * a * a.transpose());
  };
  f.S.hessian = [log_hess](const Point& x) { return Mat(log_hess(x).imag()); };
  return f;
}

ComplexField complex_field(const PolarField& f) {
  ComplexField psi;
  psi.value = [f](const Point& x) { return polar_compose(f, x); };
  auto w = [f](const Point& x) {
    const double rho = f.rho(x);
    require_density(rho, x);
    return CVec(f.rho.grad(x).cast<Complex>() / (2.0 * rho) + kI * f.S.grad(x).cast<Complex>());
  };
  psi.gradient = [f, w](const Point& x) { return CVec(polar_compose(f, x) * w(x)); };
  psi.hessian = [f, w](const Point& x) {
    const double rho = f.rho(x);
    const Vec gr = f.rho.grad(x);
    const CVec wx = w(x);
    const Mat re = f.rho.hess(x) / (2.0 * rho) - gr * gr.transpose() / (2.0 * rho * rho);
    const CMat inner = wx * wx.transpose() + re.cast<Complex>() + kI * f.S.hess(x).cast<Complex>();
    return CMat(polar_compose(f, x) * inner);
  };
  return psi;
}

namespace {

RealField lift_real(const RealField& f, double slope) {
  RealField out;
  auto head = [](const Point& X) { return Point(X.head(X.size() - 1)); };
  out.value = [f, slope, head](const Point& X) { return f(head(X)) + slope * X(X.size() - 1); };
  out.gradient = [f, slope, head](const Point& X) {
    Vec g(X.size());
    g << f.grad(head(X)), slope;
    return g;
  };
  out.hessian = [f, head](const Point& X) {
    Mat H = Mat::Zero(X.size(), X.size());
    H.topLeftCorner(X.size() - 1, X.size() - 1) = f.hess(head(X));
    return H;
  };
  return out;
}

}  // namespace

PolarField lift_polar_field(const PolarField& f, double mass) {
  return {lift_real(f.rho, 0.0), lift_real(f.S, mass)};
}

ComplexField lift_complex_field(const ComplexField& psi, double mass) {
  ComplexField out;
  auto head = [](const Point& X) { return Point(X.head(X.size() - 1)); };
  auto phase = [mass](const Point& X) { return std::exp(kI * mass * X(X.size() - 1)); };
  out.value = [=](const Point& X) { return phase(X) * psi(head(X)); };
  out.gradient = [=](const Point& X) {
    CVec g(X.size());
    g << psi.grad(head(X)), kI * mass * psi(head(X));
    return CVec(phase(X) * g);
  };
  out.hessian = [=](const Point& X) {
    const Eigen::Index n = X.size() - 1;
    CMat H(n + 1, n + 1);
    const CVec g = psi.grad(head(X));
    H.topLeftCorner(n, n) = psi.hess(head(X));
    H.block(0, n, n, 1) = kI * mass * g;
    H.block(n, 0, 1, n) = (kI * mass * g).transpose();
    H(n, n) = -mass * mass * psi(head(X));
    return CMat(phase(X) * H);
  };
  return out;
}

double PhaseUnwrapper::operator()(double principal) {
  if (!started_) {
    started_ = true;
    last_ = principal;
    return principal;
  }
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double k = std::round((last_ - principal) / two_pi);
  last_ = principal + k * two_pi;
  return last_;
}

// ---------------------------------------------------------------------------

double classical_hj_residual_rel(const BackgroundRel& bg, const PolarField& f, const Point& x) {
  const Mat g_inv = metric_inverse(bg, x);
  const Covector P = f.S.grad(x) - bg.charge * gauge_field(bg, x);
  return P.dot(g_inv * P) + bg.mass * bg.mass;
}

Vec ensemble_current(const BackgroundRel& bg, const PolarField& f, const Point& x) {
  const Mat g_inv = metric_inverse(bg, x);
  const Covector P = f.S.grad(x) - bg.charge * gauge_field(bg, x);
  return f.rho(x) * volume_element(bg, x) * (g_inv * P);
}

double continuity_residual_rel(const BackgroundRel& bg, const PolarField& f, const Point& x) {
  const RelJet j = rel_jet(bg, f, x);
  const Mat dP = f.S.hess(x) - bg.charge * j.dA;
  const Vec W = j.md.sqrt_minus_g * (j.md.g_inv * j.P);  // sqrt(-g) g^{MN} P_N
  const double divW = j.md.div_densitized.dot(j.P) + j.md.sqrt_minus_g * (j.md.g_inv.cwiseProduct(dP)).sum();
  return j.grad_rho.dot(W) + j.rho * divW;
}

double quantum_potential_rel(const BackgroundRel& bg, const PolarField& f, const Point& x) {
  const double rho = f.rho(x);
  require_density(rho, x);
  const MetricData md = metric_data(bg, x);
  const Vec gr = f.rho.grad(x);
  const Mat Hr = f.rho.hess(x);
  const double grad_sq = gr.dot(md.g_inv * gr);
  return grad_sq / (4.0 * rho * rho) - md.div_densitized.dot(gr) / (2.0 * rho * md.sqrt_minus_g) -
         md.g_inv.cwiseProduct(Hr).sum() / (2.0 * rho);
}

double quantum_hj_residual_rel(const BackgroundRel& bg, const PolarField& f, const Point& x) {
  return classical_hj_residual_rel(bg, f, x) + quantum_potential_rel(bg, f, x);
}

Complex linear_kg_residual(const BackgroundRel& bg, const ComplexField& psi, const Point& x) {
  const ComplexJet j = complex_jet(bg, psi, x);
  return covariant_laplacian(bg, j) - bg.mass * bg.mass * j.psi;
}

Complex classical_field_residual(const BackgroundRel& bg, const ComplexField& psi, const Point& x) {
  return classical_field(bg, psi, x, ClassicalFieldForm::derived);
}

Complex classical_field_residual_as_printed(const BackgroundRel& bg, const ComplexField& psi,
                                            const Point& x) {
  return classical_field(bg, psi, x, ClassicalFieldForm::as_printed);
}

Complex classical_field_residual_polar(const BackgroundRel& bg, const PolarField& f, const Point& x) {
  const double rho = f.rho(x);
  require_density(rho, x);
  const Complex psi = polar_compose(f, x);
  const double hj = classical_hj_residual_rel(bg, f, x);
  const double cont = continuity_residual_rel(bg, f, x);
  return -psi * hj + kI * cont / (volume_element(bg, x) * std::conj(psi));
}

// ---------------------------------------------------------------------------

double nc_classical_hj_residual(const NCBackground& nc, const PolarField& f, const Point& x) {
  const NCDerived d = derive_nc(nc, x);
  const double c = nc.mass - nc.charge * d.phi;
  const Covector P = f.S.grad(x) - nc.charge * d.gauge;
  return 2.0 * c * d.v_hat.dot(P) - P.dot(d.h_up * P) - 2.0 * c * c * d.Phi;
}

double nc_classical_hj_residual_vm(const NCBackground& nc, const PolarField& f, const Point& x) {
  const NCDerived d = derive_nc(nc, x);
  const double c = nc.mass - nc.charge * d.phi;
  const Covector Y = f.S.grad(x) - nc.charge * d.gauge + c * d.M;
  return -(Y.dot(d.h_up * Y) - 2.0 * c * d.v.dot(Y));
}

double nc_quantum_potential(const NCBackground& nc, const PolarField& f, const Point& x) {
  const double rho = f.rho(x);
  require_density(rho, x);
  const NCDerived d = derive_nc(nc, x);
  const NCGradients g = nc_gradients(nc, x);
  const Vec gr = f.rho.grad(x);
  const Mat Hr = f.rho.hess(x);
  const double grad_sq = gr.dot(d.h_up * gr);
  return -grad_sq / (4.0 * rho * rho) + d.h_up.cwiseProduct(Hr).sum() / (2.0 * rho) +
         g.div_e_h.dot(gr) / (2.0 * d.vol * rho);
}

double nc_quantum_hj_residual(const NCBackground& nc, const PolarField& f, const Point& x) {
  return nc_classical_hj_residual(nc, f, x) + nc_quantum_potential(nc, f, x);
}

double nc_continuity_residual(const NCBackground& nc, const PolarField& f, const Point& x) {
  const NCJet j = nc_jet(nc, x);
  const double rho = f.rho(x);
  const Vec gr = f.rho.grad(x);
  const Covector P = f.S.grad(x) - nc.charge * j.d.gauge;
  const Mat dP = f.S.hess(x) - nc.charge * j.g.gauge_jacobian;
  const Vec W = j.d.vol * (j.c * j.d.v_hat - j.d.h_up * P);
  const double divW = j.g.div_e_c_vhat - j.g.div_e_h.dot(P) - j.d.vol * j.d.h_up.cwiseProduct(dP).sum();
  return gr.dot(W) + rho * divW;
}

Complex nc_schrodinger_residual(const NCBackground& nc, const ComplexField& psi, const Point& x) {
  const NCJet j = nc_jet(nc, x);
  const double q = nc.charge;
  const int n = nc.dim;
  const Complex z = psi(x);
  const CVec grad = psi.grad(x);
  const CMat hess = psi.hess(x);
  const CVec A = j.d.gauge.cast<Complex>();
  const CVec D = grad - kI * q * A * z;

  Complex lap = (j.g.div_e_h.cast<Complex>().transpose() * D)(0) / j.d.vol;
  for (int m = 0; m < n; ++m)
    for (int k = 0; k < n; ++k)
      lap += j.d.h_up(m, k) * (hess(m, k) - kI * q * (j.g.gauge_jacobian(m, k) * z + A(k) * grad(m)));
  lap -= kI * q * (A.transpose() * j.d.h_up.cast<Complex>() * D)(0);

  const Complex drift = (j.d.v_hat.cast<Complex>().transpose() * D)(0);
  return -2.0 * kI * j.c * drift - kI * j.g.div_e_c_vhat / j.d.vol * z + lap -
         2.0 * j.d.Phi * j.c * j.c * z;
}

Complex nc_classical_field_residual(const NCBackground& nc, const PolarField& f, const Point& x) {
  const double rho = f.rho(x);
  require_density(rho, x);
  const Complex psi = polar_compose(f, x);
  const double hj = nc_classical_hj_residual(nc, f, x);
  const double cont = nc_continuity_residual(nc, f, x);
  const double e = derive_nc(nc, x).vol;
  return psi * hj - kI * cont / (e * std::conj(psi));
}

}  // namespace bohm
