#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace bohm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Coordinates X^M of a spacetime point (hbar = c = 1, dimensionless).
using Point = Vec;
// Lower-index object such as p_M or A_M.
using Covector = Vec;

/// Below this density a field point counts as a node of the wave function.
inline constexpr double kNodeEpsilon = 1e-10;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BOHM_DEFINE_ERROR(Name)                          \
  class Name : public Error {                            \
   public:                                               \
    explicit Name(const std::string& what)               \
        : Error(std::string(#Name ": ") + what) {}       \
  }

BOHM_DEFINE_ERROR(SingularMetric);
BOHM_DEFINE_ERROR(SignatureViolation);
BOHM_DEFINE_ERROR(DegenerateFrame);
BOHM_DEFINE_ERROR(NodeEncountered);
BOHM_DEFINE_ERROR(StepFailure);
BOHM_DEFINE_ERROR(TachyonicInput);
BOHM_DEFINE_ERROR(ImaginaryMass);
BOHM_DEFINE_ERROR(DegenerateVelocity);
BOHM_DEFINE_ERROR(MassSingular);
BOHM_DEFINE_ERROR(UnknownScenario);
BOHM_DEFINE_ERROR(BadParameter);

#undef BOHM_DEFINE_ERROR

// Newton-type solver that gave up; carries the best residual it reached.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, double best_residual)
      : Error("NoConvergence: " + what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

inline Vec unit_vector(Eigen::Index n, Eigen::Index i) {
  Vec e = Vec::Zero(n);
  e(i) = 1.0;
  return e;
}

}  // namespace bohm
