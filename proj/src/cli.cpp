#include "bohm/cli.hpp"

#include "bohm/dynamics.hpp"
#include "bohm/hj_foundation.hpp"
#include "bohm/nc_reduction.hpp"
#include "bohm/pilot_wave.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

namespace bohm::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Config parsing

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError("field '" + field + "' must be a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ConfigError("field '" + field + "' must be an integer");
  return j.get<int>();
}

std::vector<double> numbers(const json& j, const std::string& field) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) throw ConfigError("field '" + field + "' must be a number or an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : j.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* s) { return k == s; }) == keys.end())
      throw ConfigError("unknown field '" + (where.empty() ? k : where + "." + k) + "'");
  }
}

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---------------------------------------------------------------------------
// Output

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Log lines only.
std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Writes files atomically (temp + rename) from a single thread and keeps
// the list of what was written for the manifest.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::string& content) {
    const fs::path tmp = dir_ / ("." + name + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
      out << content;
      if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, dir_ / name);
    files_.push_back({name, content.size(), fnv1a64(content)});
  }

  void manifest(const RunConfig& cfg, bool passed) {
    json j;
    j["command"] = cfg.command;
    j["scenario"] = cfg.scenario;
    j["config_hash"] = hex64(fnv1a64(cfg.canonical));
    j["passed"] = passed;
    json files = json::array();
    for (const auto& f : files_) files.push_back({{"name", f.name}, {"bytes", f.bytes}, {"fnv1a64", hex64(f.hash)}});
    j["files"] = files;
    const std::string text = j.dump(2) + "\n";
    const fs::path tmp = dir_ / ".manifest.json.tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << text;
    }
    fs::rename(tmp, dir_ / "manifest.json");
  }

 private:
  struct Entry {
    std::string name;
    std::size_t bytes;
    std::uint64_t hash;
  };
  fs::path dir_;
  std::vector<Entry> files_;
};

// ---------------------------------------------------------------------------
// Work distribution. Results land by index, so output order never depends
// on the number of workers.

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Suites

struct Gate {
  std::string name;
  bool passed;
  std::string detail;
};

struct Outcome {
  std::vector<ResidualReport> reports;
  std::vector<Gate> extra_gates;
};

int axis_count(const Scenario& s) { return static_cast<int>(s.region_lo.size()); }

GridSpec effective_grid(const Scenario& s, const RunConfig& cfg) {
  if (cfg.grid) {
    if (static_cast<int>(cfg.grid->lo.size()) != axis_count(s))
      throw ConfigError("field 'grid.bounds' needs " + std::to_string(axis_count(s)) + " axes for scenario " + s.name);
    return *cfg.grid;
  }
  const int n = axis_count(s);
  int per_axis = n <= 2 ? 50 : n == 3 ? 12 : 6;
  if (s.kind == ScenarioKind::hj_foundation) per_axis = 10;
  return {s.region_lo, s.region_hi, std::vector<int>(n, per_axis)};
}

std::vector<Point> grid_points(const GridSpec& g) {
  const int n = static_cast<int>(g.lo.size());
  std::size_t total = 1;
  for (int k : g.samples) total *= static_cast<std::size_t>(k);
  std::vector<Point> pts;
  pts.reserve(total);
  std::vector<int> idx(n, 0);
  for (std::size_t c = 0; c < total; ++c) {
    Point x(n);
    for (int a = 0; a < n; ++a) x(a) = g.lo(a) + (g.hi(a) - g.lo(a)) * idx[a] / (g.samples[a] - 1);
    pts.push_back(x);
    for (int a = n - 1; a >= 0; --a) {
      if (++idx[a] < g.samples[a]) break;
      idx[a] = 0;
    }
  }
  return pts;
}

bool interior(const GridSpec& g, const Point& x) {
  for (Eigen::Index a = 0; a < x.size(); ++a) {
    const double span = g.hi(a) - g.lo(a);
    if (x(a) <= g.lo(a) + 1e-12 * span || x(a) >= g.hi(a) - 1e-12 * span) return false;
  }
  return true;
}

std::optional<double> tol(const Scenario& s, const std::string& key) {
  auto it = s.tolerances.find(key);
  if (it == s.tolerances.end()) return std::nullopt;
  return it->second;
}

struct Equation {
  std::string name;
  std::function<double(const Point&)> eval;
};

std::vector<Equation> equations(const Scenario& s) {
  std::vector<Equation> eq;
  if (s.rel && s.polar) {
    const BackgroundRel bg = *s.rel;
    const PolarField f = *s.polar;
    eq.push_back({"classical_hj", [=](const Point& x) { return classical_hj_residual_rel(bg, f, x); }});
    eq.push_back({"quantum_hj", [=](const Point& x) { return quantum_hj_residual_rel(bg, f, x); }});
    eq.push_back({"continuity", [=](const Point& x) { return continuity_residual_rel(bg, f, x); }});
    eq.push_back({"quantum_potential", [=](const Point& x) { return quantum_potential_rel(bg, f, x); }});
    if (s.psi) {
      const ComplexField psi = *s.psi;
      eq.push_back({"linear_kg", [=](const Point& x) { return std::abs(linear_kg_residual(bg, psi, x)); }});
      eq.push_back({"classical_field", [=](const Point& x) { return std::abs(classical_field_residual(bg, psi, x)); }});
    }
  } else if (s.nc && s.polar) {
    const NCBackground nc = *s.nc;
    const PolarField f = *s.polar;
    eq.push_back({"nc_classical_hj", [=](const Point& x) { return nc_classical_hj_residual(nc, f, x); }});
    eq.push_back({"nc_quantum_hj", [=](const Point& x) { return nc_quantum_hj_residual(nc, f, x); }});
    eq.push_back({"nc_continuity", [=](const Point& x) { return nc_continuity_residual(nc, f, x); }});
    eq.push_back({"nc_quantum_potential", [=](const Point& x) { return nc_quantum_potential(nc, f, x); }});
    eq.push_back({"nc_classical_field", [=](const Point& x) { return std::abs(nc_classical_field_residual(nc, f, x)); }});
    if (s.psi) {
      const ComplexField psi = *s.psi;
      eq.push_back({"nc_schrodinger", [=](const Point& x) { return std::abs(nc_schrodinger_residual(nc, psi, x)); }});
    }
    eq.push_back({"ehat_identity", [=](const Point& x) { return ehat_identity_check(nc, x).max_abs(); }});
  }
  return eq;
}

// Evaluates every equation at every point; nodes become skipped samples.
std::vector<ResidualReport> sweep(const Scenario& s, const std::vector<Equation>& eqs, const std::vector<Point>& pts,
                                  int jobs) {
  std::vector<std::vector<std::optional<double>>> values(pts.size());
  parallel_for(pts.size(), jobs, [&](std::size_t i) {
    values[i].resize(eqs.size());
    for (std::size_t e = 0; e < eqs.size(); ++e) {
      try {
        values[i][e] = eqs[e].eval(pts[i]);
      } catch (const NodeEncountered&) {
        values[i][e].reset();
      }
    }
  });
  std::vector<ResidualReport> out;
  for (std::size_t e = 0; e < eqs.size(); ++e) {
    ResidualReport r(eqs[e].name, tol(s, eqs[e].name));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (values[i][e])
        r.add(pts[i], *values[i][e]);
      else
        r.add_skipped();
    }
    out.push_back(std::move(r));
  }
  return out;
}

void residual_suite(const Scenario& s, const RunConfig& cfg, Outcome& out) {
  const auto pts = grid_points(effective_grid(s, cfg));
  for (auto& r : sweep(s, equations(s), pts, cfg.jobs)) out.reports.push_back(std::move(r));
  if (auto lower = tol(s, "classical_field_min")) {
    const double threshold = *lower / cfg.tolerance_scale;
    for (const auto& r : out.reports) {
      if (r.name() != "classical_field") continue;
      out.extra_gates.push_back({"classical_field_min", r.max_abs() > threshold,
                                 "max |r| = " + brief(r.max_abs()) + " must exceed " + brief(threshold)});
    }
  }
}

std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream os;
  const Eigen::Index D = t.samples.empty() ? 0 : t.samples.front().X.size();
  os << "lambda";
  for (Eigen::Index i = 0; i < D; ++i) os << ",X" << i;
  for (Eigen::Index i = 0; i < D; ++i) os << ",p" << i;
  os << ",constraint_residual\n";
  for (const auto& smp : t.samples) {
    os << fmt(smp.lambda);
    for (Eigen::Index i = 0; i < D; ++i) os << ',' << fmt(smp.X(i));
    for (Eigen::Index i = 0; i < D; ++i) os << ',' << fmt(smp.p(i));
    os << ',' << fmt(smp.constraint_residual) << '\n';
  }
  return os.str();
}

std::string trajectory_json(const Trajectory& t, const Point& seed) {
  json j;
  j["parametrization"] = to_string(t.parametrization);
  j["seed"] = std::vector<double>(seed.data(), seed.data() + seed.size());
  json samples = json::array();
  for (const auto& smp : t.samples) {
    samples.push_back({{"lambda", smp.lambda},
                       {"X", std::vector<double>(smp.X.data(), smp.X.data() + smp.X.size())},
                       {"p", std::vector<double>(smp.p.data(), smp.p.data() + smp.p.size())},
                       {"constraint_residual", number_json(smp.constraint_residual)}});
  }
  j["samples"] = samples;
  return j.dump(2) + "\n";
}

void trajectory_suite(const Scenario& s, const RunConfig& cfg, ArtifactWriter& writer, Outcome& out,
                      std::ostream& log) {
  if (!s.polar || (!s.rel && !s.nc)) throw ConfigError("scenario " + s.name + " has no guidance field");
  const TrajectorySpec spec = cfg.trajectories.value_or(TrajectorySpec{});
  const std::vector<Point> seeds = spec.seeds.empty() ? s.seeds : spec.seeds;
  const double span = spec.span.value_or(s.span);
  IntegratorOptions opts;
  opts.rtol = spec.rtol;
  opts.atol = spec.atol;
  const GuidanceField gf = s.guidance();

  std::vector<std::optional<Trajectory>> trajs(seeds.size());
  std::vector<std::string> failures(seeds.size());
  parallel_for(seeds.size(), cfg.jobs, [&](std::size_t k) {
    try {
      trajs[k] = integrate_trajectory(gf, seeds[k], 0.0, span, spec.steps, opts);
    } catch (const Error& e) {
      failures[k] = e.what();
    }
  });

  ResidualReport failed("trajectory_failures", 0.0);
  ResidualReport constraint("hamiltonian_constraint", tol(s, "hamiltonian_constraint"));
  const bool relative = tol(s, "trajectory_relative").has_value();
  ResidualReport oracle(relative ? "trajectory_relative" : "trajectory_endpoint",
                        relative ? tol(s, "trajectory_relative") : tol(s, "trajectory_endpoint"));
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    failed.add(seeds[k], trajs[k] ? 0.0 : 1.0);
    if (!trajs[k]) {
      log << "trajectory " << k << " failed: " << failures[k] << "\n";
      continue;
    }
    const Trajectory& t = *trajs[k];
    constraint.merge(hamiltonian_constraint_residual(t, gf));
    if (s.trajectory_oracle) {
      for (const auto& smp : t.samples) {
        const Point ref = s.trajectory_oracle(seeds[k], smp.lambda);
        double e = 0.0;
        if (relative) {
          for (Eigen::Index i = 1; i < ref.size(); ++i)
            e = std::max(e, std::abs(smp.X(i) - ref(i)) / std::max(std::abs(ref(i)), 1e-300));
        } else {
          e = (smp.X - ref).cwiseAbs().maxCoeff();
        }
        oracle.add(smp.X, e);
      }
    }
    const std::string name = "traj_" + std::to_string(k);
    if (cfg.format == "json")
      writer.write(name + ".json", trajectory_json(t, seeds[k]));
    else
      writer.write(name + ".csv", trajectory_csv(t));
  }
  out.reports.push_back(std::move(failed));
  out.reports.push_back(std::move(constraint));
  if (s.trajectory_oracle) out.reports.push_back(std::move(oracle));
}

void reduce_suite(const Scenario& s, const RunConfig& cfg, Outcome& out) {
  if (!s.nc) throw ConfigError("command 'reduce' needs a newton-cartan scenario, got " + s.name);
  const NCBackground nc = *s.nc;
  const auto pts = grid_points(effective_grid(s, cfg));
  const BackgroundRel lifted = lifted_background(nc, 0.0);
  const double u = 0.3;
  auto lift = [u](const Point& x) {
    Point X(x.size() + 1);
    X << x, u;
    return X;
  };

  std::vector<Equation> eqs;
  eqs.push_back({"frame_identities", [=](const Point& x) { return frame_identity_residuals(derive_nc(nc, x)).max(); }});
  eqs.push_back({"ehat_identity", [=](const Point& x) { return ehat_identity_check(nc, x).max_abs(); }});
  eqs.push_back({"lift_inverse", [=](const Point& x) {
                   const NullLift L = null_lift(nc, x);
                   return (L.gamma_inv - Mat(L.gamma.inverse())).cwiseAbs().maxCoeff();
                 }});
  eqs.push_back({"lift_product", [=](const Point& x) {
                   const NullLift L = null_lift(nc, x);
                   const Eigen::Index n = L.gamma.rows();
                   return (L.gamma * L.gamma_inv - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
                 }});
  eqs.push_back({"lift_volume", [=](const Point& x) {
                   const NullLift L = null_lift(nc, x);
                   return std::abs(std::sqrt(-L.gamma.determinant()) - L.vol) / L.vol;
                 }});
  eqs.push_back({"lift_signature", [=](const Point& x) {
                   const NullLift L = null_lift(nc, x);
                   Eigen::SelfAdjointEigenSolver<Mat> es(L.gamma);
                   const long neg = (es.eigenvalues().array() < 0).count();
                   return neg == 1 ? 0.0 : 1.0;
                 }});
  if (s.polar) {
    const PolarField f = *s.polar;
    const PolarField lf = lift_polar_field(f, nc.mass);
    eqs.push_back({"lifted_hj", [=](const Point& x) {
                     return classical_hj_residual_rel(lifted, lf, lift(x)) + nc_classical_hj_residual(nc, f, x);
                   }});
    eqs.push_back({"lifted_quantum_hj", [=](const Point& x) {
                     return quantum_hj_residual_rel(lifted, lf, lift(x)) + nc_quantum_hj_residual(nc, f, x);
                   }});
    eqs.push_back({"lifted_continuity", [=](const Point& x) {
                     return continuity_residual_rel(lifted, lf, lift(x)) + nc_continuity_residual(nc, f, x);
                   }});
  }
  if (s.psi) {
    const ComplexField psi = *s.psi;
    const ComplexField lpsi = lift_complex_field(psi, nc.mass);
    const double m = nc.mass;
    eqs.push_back({"lifted_schrodinger", [=](const Point& x) {
                     const Complex kg = linear_kg_residual(lifted, lpsi, lift(x)) * std::exp(Complex(0, -m * u));
                     return std::abs(kg - nc_schrodinger_residual(nc, psi, x));
                   }});
  }

  Scenario gated = s;
  gated.tolerances = {{"frame_identities", 1e-10}, {"ehat_identity", 1e-9},      {"lift_inverse", 1e-10},
                      {"lift_product", 1e-10},     {"lift_volume", 1e-10},       {"lift_signature", 0.0},
                      {"lifted_hj", 1e-7},         {"lifted_quantum_hj", 1e-6},  {"lifted_continuity", 1e-7},
                      {"lifted_schrodinger", 1e-6}};
  for (auto& r : sweep(gated, eqs, pts, cfg.jobs)) out.reports.push_back(std::move(r));
}

void hj_suite(const Scenario& s, const RunConfig& cfg, Outcome& out) {
  if (s.kind != ScenarioKind::hj_foundation) throw ConfigError("command 'hj-verify' needs an hj-foundation scenario, got " + s.name);
  const GridSpec grid = effective_grid(s, cfg);
  const auto pts = grid_points(grid);
  const LagrangianSystem sys = *s.system;
  const int n = sys.dim;

  struct Row {
    double momentum = kInf, energy = kInf, el = kInf, action = kInf;
    std::optional<double> pde;
  };
  std::vector<Row> rows(pts.size());
  parallel_for(pts.size(), cfg.jobs, [&](std::size_t i) {
    BoundaryValueProblem bvp = *s.bvp;
    bvp.Xf = pts[i].head(n);
    bvp.lambdaf = pts[i](n);
    Row& row = rows[i];
    try {
      const DiscretePath path = extremize(sys, bvp);
      row.el = path.el_residual;
      if (s.action_oracle) row.action = std::abs(action_value(sys, path) - s.action_oracle(bvp.Xf, bvp.lambdaf));
      const HJRelations rel = verify_hj_relations(sys, bvp);
      row.momentum = rel.momentum_residual();
      row.energy = rel.energy_residual();
      if (interior(grid, pts[i])) row.pde = std::abs(hj_pde_residual(sys, bvp));
    } catch (const NoConvergence& e) {
      row.el = e.best_residual();
      if (interior(grid, pts[i])) row.pde = kInf;
    }
  });

  ResidualReport mom("hj_momentum", tol(s, "hj_momentum")), en("hj_energy", tol(s, "hj_energy"));
  ResidualReport el("el_residual", tol(s, "el_residual")), pde("hj_pde", tol(s, "hj_pde"));
  ResidualReport act("action_oracle", 1e-8);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    mom.add(pts[i], rows[i].momentum);
    en.add(pts[i], rows[i].energy);
    el.add(pts[i], rows[i].el);
    if (s.action_oracle) act.add(pts[i], rows[i].action);
    if (rows[i].pde) pde.add(pts[i], *rows[i].pde);
  }
  out.reports.push_back(std::move(mom));
  out.reports.push_back(std::move(en));
  out.reports.push_back(std::move(el));
  if (s.action_oracle) out.reports.push_back(std::move(act));
  if (pde.size() > 0) out.reports.push_back(std::move(pde));
}

void superposition_demo(const Scenario& s, const RunConfig& cfg, ArtifactWriter& writer, Outcome& out) {
  if (!s.rel || !s.psi) throw ConfigError("command 'superposition-demo' needs a relativistic scenario with a wave function");
  const BackgroundRel bg = *s.rel;
  const ComplexField psi = *s.psi;
  const auto pts = grid_points(effective_grid(s, cfg));
  const std::vector<Equation> eqs = {
      {"linear_kg", [=](const Point& x) { return std::abs(linear_kg_residual(bg, psi, x)); }},
      {"classical_field", [=](const Point& x) { return std::abs(classical_field_residual(bg, psi, x)); }}};
  Scenario gated = s;
  gated.tolerances = {{"linear_kg", tol(s, "linear_kg").value_or(1e-9)}};
  auto reports = sweep(gated, eqs, pts, cfg.jobs);
  const double threshold = tol(s, "classical_field_min").value_or(1e-2) / cfg.tolerance_scale;
  const bool nonlinear = reports[1].max_abs() > threshold;
  const bool linear = reports[0].passed(cfg.tolerance_scale);

  json j;
  j["scenario"] = s.name;
  j["samples"] = pts.size();
  j["skipped"] = reports[1].skipped();
  j["linear_residual_max"] = number_json(reports[0].max_abs());
  j["linear_tolerance"] = *reports[0].tolerance() * cfg.tolerance_scale;
  j["classical_residual_max"] = number_json(reports[1].max_abs());
  j["classical_residual_mean"] = number_json(reports[1].mean_abs());
  j["classical_threshold"] = threshold;
  j["classical_fraction_above_threshold"] = reports[1].fraction_above(threshold);
  j["linear_passed"] = linear;
  j["classical_violated"] = nonlinear;
  j["passed"] = linear && nonlinear;
  writer.write("superposition_demo.json", j.dump(2) + "\n");

  out.extra_gates.push_back({"classical_field_min", nonlinear,
                             "max |r| = " + brief(reports[1].max_abs()) + " must exceed " + brief(threshold)});
  for (auto& r : reports) out.reports.push_back(std::move(r));
}

void crosscheck_suite(const Scenario& s, Outcome& out) { out.reports.push_back(derivative_crosscheck(s)); }

std::string report_json(const ResidualReport& r, double scale, bool with_samples) {
  json j;
  j["name"] = r.name();
  j["tolerance"] = r.tolerance() ? json(*r.tolerance() * scale) : json(nullptr);
  j["passed"] = r.passed(scale);
  j["count"] = r.size();
  j["skipped"] = r.skipped();
  j["max_abs"] = number_json(r.max_abs());
  j["mean_abs"] = number_json(r.mean_abs());
  if (with_samples) {
    json data = json::array();
    for (const auto& smp : r.samples())
      data.push_back({{"x", std::vector<double>(smp.x.data(), smp.x.data() + smp.x.size())},
                      {"value", number_json(smp.value)}});
    j["samples"] = data;
  }
  return j.dump(2) + "\n";
}

// Everything that changes the numbers; output location and job count do not.
std::string canonical_json(const RunConfig& cfg) {
  json j;
  j["scenario"] = {{"name", cfg.scenario}, {"params", cfg.params}};
  j["command"] = cfg.command;
  j["format"] = cfg.format;
  j["tolerance_scale"] = cfg.tolerance_scale;
  if (cfg.grid) {
    json b = json::array();
    for (Eigen::Index a = 0; a < cfg.grid->lo.size(); ++a) b.push_back({cfg.grid->lo(a), cfg.grid->hi(a)});
    j["grid"] = {{"bounds", b}, {"samples", cfg.grid->samples}};
  }
  if (cfg.trajectories) {
    const auto& t = *cfg.trajectories;
    json seeds = json::array();
    for (const auto& x : t.seeds) seeds.push_back(std::vector<double>(x.data(), x.data() + x.size()));
    j["trajectories"] = {{"seeds", seeds}, {"steps", t.steps}, {"rtol", t.rtol}, {"atol", t.atol}};
    if (t.span) j["trajectories"]["span"] = *t.span;
  }
  return j.dump();
}

std::string report_csv(const ResidualReport& r) {
  std::ostringstream os;
  const Eigen::Index n = r.samples().empty() ? 0 : r.samples().front().x.size();
  for (Eigen::Index i = 0; i < n; ++i) os << 'x' << i << ',';
  os << "value\n";
  for (const auto& smp : r.samples()) {
    for (Eigen::Index i = 0; i < n; ++i) os << fmt(smp.x(i)) << ',';
    os << fmt(smp.value) << '\n';
  }
  return os.str();
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const char* formats_help() {
  return "Output files (written into --out):\n"
         "  manifest.json         command, scenario, config_hash (FNV-1a 64), passed, files[name, bytes, fnv1a64]\n"
         "  report_<name>.json    name, tolerance, passed, count, skipped, max_abs, mean_abs[, samples]\n"
         "  report_<name>.csv     x0..x{n-1}, value   (csv format only)\n"
         "  traj_<k>.csv          lambda, X0..X{D-1}, p0..p{D-1}, constraint_residual\n"
         "  traj_<k>.json         parametrization, seed, samples[lambda, X, p, constraint_residual]\n"
         "  superposition_demo.json  linear/classical residual maxima and verdict\n"
         "CSV numbers carry 17 significant digits. Exit status: 0 pass, 1 tolerance failure, 2 config error.\n";
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    throw ConfigError("JSON syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                      e.what());
  }
  if (!j.is_object()) throw ConfigError("top level must be a JSON object");
  only_keys(j, "", {"scenario", "command", "grid", "trajectories", "output", "format"});

  RunConfig cfg;
  if (!j.contains("scenario")) throw ConfigError("missing required field 'scenario'");
  const json& sc = j["scenario"];
  if (sc.is_string()) {
    cfg.scenario = sc.get<std::string>();
  } else if (sc.is_object()) {
    only_keys(sc, "scenario", {"name", "params"});
    if (!sc.contains("name") || !sc["name"].is_string()) throw ConfigError("missing required field 'scenario.name'");
    cfg.scenario = sc["name"].get<std::string>();
    if (sc.contains("params")) {
      if (!sc["params"].is_object()) throw ConfigError("field 'scenario.params' must be an object");
      for (const auto& [k, v] : sc["params"].items()) cfg.params[k] = numbers(v, "scenario.params." + k);
    }
  } else {
    throw ConfigError("field 'scenario' must be a name or an object");
  }

  if (j.contains("command")) {
    if (!j["command"].is_string()) throw ConfigError("field 'command' must be a string");
    cfg.command = j["command"].get<std::string>();
    const auto& c = commands();
    if (std::find(c.begin(), c.end(), cfg.command) == c.end())
      throw ConfigError("field 'command' has unknown value '" + cfg.command + "'");
  }

  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (!g.is_object()) throw ConfigError("field 'grid' must be an object");
    only_keys(g, "grid", {"bounds", "samples"});
    if (!g.contains("bounds") || !g["bounds"].is_array() || g["bounds"].empty())
      throw ConfigError("field 'grid.bounds' must be a non-empty array of [lo, hi] pairs");
    GridSpec spec;
    const std::size_t n = g["bounds"].size();
    spec.lo.resize(static_cast<Eigen::Index>(n));
    spec.hi.resize(static_cast<Eigen::Index>(n));
    for (std::size_t a = 0; a < n; ++a) {
      const std::string field = "grid.bounds[" + std::to_string(a) + "]";
      const auto b = numbers(g["bounds"][a], field);
      if (b.size() != 2 || !(b[1] > b[0])) throw ConfigError("field '" + field + "' must be [lo, hi] with hi > lo");
      spec.lo(static_cast<Eigen::Index>(a)) = b[0];
      spec.hi(static_cast<Eigen::Index>(a)) = b[1];
    }
    if (!g.contains("samples")) throw ConfigError("missing required field 'grid.samples'");
    if (g["samples"].is_array()) {
      if (g["samples"].size() != n) throw ConfigError("field 'grid.samples' needs one entry per axis");
      for (std::size_t a = 0; a < n; ++a) spec.samples.push_back(integer(g["samples"][a], "grid.samples"));
    } else {
      spec.samples.assign(n, integer(g["samples"], "grid.samples"));
    }
    for (int s : spec.samples)
      if (s < 2) throw ConfigError("field 'grid.samples' must be at least 2 per axis");
    cfg.grid = spec;
  }

  if (j.contains("trajectories")) {
    const json& t = j["trajectories"];
    if (!t.is_object()) throw ConfigError("field 'trajectories' must be an object");
    only_keys(t, "trajectories", {"seeds", "span", "steps", "rtol", "atol"});
    TrajectorySpec spec;
    if (t.contains("seeds")) {
      if (!t["seeds"].is_array()) throw ConfigError("field 'trajectories.seeds' must be an array of points");
      for (std::size_t k = 0; k < t["seeds"].size(); ++k)
        spec.seeds.push_back(to_vec(numbers(t["seeds"][k], "trajectories.seeds[" + std::to_string(k) + "]")));
    }
    if (t.contains("span")) {
      spec.span = number(t["span"], "trajectories.span");
      if (!(*spec.span > 0)) throw ConfigError("field 'trajectories.span' must be positive");
    }
    if (t.contains("steps")) {
      spec.steps = integer(t["steps"], "trajectories.steps");
      if (spec.steps < 1) throw ConfigError("field 'trajectories.steps' must be at least 1");
    }
    if (t.contains("rtol")) spec.rtol = number(t["rtol"], "trajectories.rtol");
    if (t.contains("atol")) spec.atol = number(t["atol"], "trajectories.atol");
    if (!(spec.rtol > 0) || !(spec.atol > 0)) throw ConfigError("fields 'trajectories.rtol/atol' must be positive");
    if (cfg.grid) {
      for (std::size_t k = 0; k < spec.seeds.size(); ++k) {
        const Point& x = spec.seeds[k];
        bool inside = x.size() == cfg.grid->lo.size();
        for (Eigen::Index a = 0; inside && a < x.size(); ++a)
          inside = x(a) >= cfg.grid->lo(a) && x(a) <= cfg.grid->hi(a);
        if (!inside) throw ConfigError("field 'trajectories.seeds[" + std::to_string(k) + "]' lies outside grid bounds");
      }
    }
    cfg.trajectories = spec;
  }

  if (j.contains("output")) {
    if (!j["output"].is_string()) throw ConfigError("field 'output' must be a string");
    cfg.output = j["output"].get<std::string>();
  }
  if (j.contains("format")) {
    if (!j["format"].is_string()) throw ConfigError("field 'format' must be a string");
    cfg.format = j["format"].get<std::string>();
  }
  if (cfg.format != "csv" && cfg.format != "json") throw ConfigError("field 'format' must be 'csv' or 'json'");

  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

int run(const RunConfig& config, std::ostream& log) {
  RunConfig cfg = config;
  cfg.canonical = canonical_json(cfg);
  Scenario s;
  try {
    if (cfg.command.empty()) throw ConfigError("missing required field 'command' (give a subcommand or set it in the config)");
    if (!(cfg.tolerance_scale > 0)) throw ConfigError("--tolerance-scale must be positive");
    s = build(cfg.scenario, cfg.params);
    if (cfg.trajectories && !cfg.grid) {
      // Seeds are checked against the scenario box when no grid is configured.
      for (std::size_t k = 0; k < cfg.trajectories->seeds.size(); ++k) {
        if (cfg.trajectories->seeds[k].size() != s.region_lo.size())
          throw ConfigError("field 'trajectories.seeds[" + std::to_string(k) + "]' has the wrong dimension");
      }
    }
  } catch (const Error& e) {
    log << e.what() << "\n";
    return 2;
  }

  Outcome out;
  std::optional<ArtifactWriter> sink;
  // Whatever was written before a failure is still listed.
  auto seal = [&] {
    if (!sink) return;
    try {
      sink->manifest(cfg, false);
    } catch (const std::exception&) {
    }
  };
  try {
    sink.emplace(cfg.output);
    ArtifactWriter& writer = *sink;
    const std::string& c = cfg.command;
    if (c == "check") {
      crosscheck_suite(s, out);
      if (s.kind == ScenarioKind::hj_foundation) {
        hj_suite(s, cfg, out);
      } else {
        residual_suite(s, cfg, out);
        if (!s.seeds.empty() || (cfg.trajectories && !cfg.trajectories->seeds.empty()))
          trajectory_suite(s, cfg, writer, out, log);
      }
    } else if (c == "residuals") {
      if (s.kind == ScenarioKind::hj_foundation)
        hj_suite(s, cfg, out);
      else
        residual_suite(s, cfg, out);
    } else if (c == "trajectories") {
      trajectory_suite(s, cfg, writer, out, log);
    } else if (c == "reduce") {
      reduce_suite(s, cfg, out);
    } else if (c == "hj-verify") {
      hj_suite(s, cfg, out);
    } else if (c == "superposition-demo") {
      superposition_demo(s, cfg, writer, out);
    }

    bool passed = true;
    for (const auto& r : out.reports) {
      writer.write("report_" + r.name() + ".json", report_json(r, cfg.tolerance_scale, cfg.format == "json"));
      if (cfg.format == "csv") writer.write("report_" + r.name() + ".csv", report_csv(r));
      const bool ok = r.passed(cfg.tolerance_scale);
      passed = passed && ok;
      log << (ok ? "ok    " : "FAIL  ") << r.name() << "  max|r| = " << brief(r.max_abs());
      if (r.tolerance()) log << "  tol = " << brief(*r.tolerance() * cfg.tolerance_scale);
      log << "  n = " << r.size();
      if (r.skipped()) log << "  skipped = " << r.skipped();
      log << "\n";
    }
    for (const auto& g : out.extra_gates) {
      passed = passed && g.passed;
      log << (g.passed ? "ok    " : "FAIL  ") << g.name << "  " << g.detail << "\n";
    }
    writer.manifest(cfg, passed);
    if (!passed) {
      for (const auto& r : out.reports)
        if (!r.passed(cfg.tolerance_scale)) log << "tolerance failure in report '" << r.name() << "'\n";
      for (const auto& g : out.extra_gates)
        if (!g.passed) log << "tolerance failure in check '" << g.name << "'\n";
    }
    return passed ? 0 : 1;
  } catch (const ConfigError& e) {
    log << e.what() << "\n";
    seal();
    return 2;
  } catch (const std::exception& e) {
    log << "run failed: " << e.what() << "\n";
    seal();
    return 1;
  }
}

int main(int argc, char** argv) {
  CLI::App app{"Pilot-wave residual suites, Bohmian trajectories and null-reduction checks.", "bohm"};
  app.footer(formats_help());
  app.fallthrough();
  std::string config_path, out_dir, format;
  int jobs = 1;
  double scale = 1.0;
  bool list = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_dir, "output directory (overrides 'output')");
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", format, "csv or json (overrides 'format')")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--tolerance-scale", scale, "uniform tolerance relaxation factor")->check(CLI::PositiveNumber);
  app.add_flag("--list-scenarios", list, "print the scenario registry and exit");
  for (const auto& c : commands()) app.add_subcommand(c, "run the " + c + " suite");
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (list) {
    for (const auto& n : registry_names()) std::cout << n << "\n";
    return 0;
  }
  if (config_path.empty()) {
    std::cerr << "config error: --config is required\n";
    return 2;
  }
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  if (!app.get_subcommands().empty()) cfg.command = app.get_subcommands().front()->get_name();
  if (!out_dir.empty()) cfg.output = out_dir;
  if (!format.empty()) cfg.format = format;
  cfg.jobs = jobs;
  cfg.tolerance_scale = scale;
  return run(cfg, std::cerr);
}

}  // namespace bohm::cli
