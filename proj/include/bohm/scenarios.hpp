#pragma once

#include "bohm/core.hpp"
#include "bohm/dynamics.hpp"
#include "bohm/field.hpp"
#include "bohm/geometry.hpp"
#include "bohm/hj_foundation.hpp"
#include "bohm/nc_reduction.hpp"
#include "bohm/report.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bohm {

enum class ScenarioKind { relativistic, newton_cartan, hj_foundation };
const char* to_string(ScenarioKind k);

// Scalars are one-element vectors.
using ParamMap = std::map<std::string, std::vector<double>>;

struct Scenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::relativistic;
  ParamMap params;  // every parameter, defaults filled in

  std::optional<BackgroundRel> rel;
  std::optional<NCBackground> nc;
  std::optional<PolarField> polar;
  std::optional<ComplexField> psi;
  std::optional<LagrangianSystem> system;
  std::optional<BoundaryValueProblem> bvp;

  // Closed-form guidance trajectory through x0 (lambda measured from x0).
  std::function<Point(const Point& x0, double lambda)> trajectory_oracle;
  // hj scenarios: closed-form extremal of the default bvp and action S(Xf, lambdaf).
  std::function<Vec(double lambda)> path_oracle;
  std::function<double(const Vec& Xf, double lambdaf)> action_oracle;

  VelocityLaw law = VelocityLaw::quantum;
  // Axis-aligned sampling box; for hj scenarios the box of (Xf, lambdaf).
  Vec region_lo;
  Vec region_hi;
  std::vector<Point> seeds;
  double span = 1.0;
  // Documented residual tolerances by equation name.
  std::map<std::string, double> tolerances;

  double param(const std::string& key) const;
  Vec vector_param(const std::string& key) const;
  GuidanceField guidance() const;
};

/// Throws UnknownScenario for names outside the registry and BadParameter
/// for unknown keys, wrong vector lengths or values out of range.
Scenario build(const std::string& name, const ParamMap& overrides = {});
std::vector<std::string> registry_names();

/// Analytic first and second derivatives of every supplied field against
/// central differences at random points of the sampling box. Values are
/// errors relative to max(1, |analytic|).
ResidualReport derivative_crosscheck(const Scenario& s, int points = 50, std::uint64_t seed = 20240611);

}  // namespace bohm
