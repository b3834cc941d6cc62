#include "zdshape/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "zdshape/dynamics.hpp"

namespace zdshape {

using nlohmann::json;

double Reference::Rx(double t) const {
  return x_c + amplitude * std::cos(2.0 * std::numbers::pi * t / period);
}

double Reference::RxDot(double t) const {
  const double w = 2.0 * std::numbers::pi / period;
  return -amplitude * w * std::sin(w * t);
}

namespace {

[[noreturn]] void Bad(const std::string& what) {
  throw ZdError(ErrorCode::kConfig, what);
}

void CheckKeys(const json& j, const std::set<std::string>& allowed,
               const std::string& where) {
  if (!j.is_object()) Bad(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) Bad("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void Get(const json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

template <typename T>
void GetOpt(const json& j, const char* key, std::optional<T>* out) {
  if (j.contains(key) && !j.at(key).is_null()) *out = j.at(key).get<T>();
}

template <std::size_t N>
void GetArray(const json& j, const char* key, std::array<double, N>* out) {
  if (!j.contains(key)) return;
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != N) Bad(std::string(key) + " needs " + std::to_string(N) + " entries");
  for (std::size_t i = 0; i < N; ++i) (*out)[i] = v[i];
}

template <int N>
void GetVector(const json& j, const char* key, Eigen::Matrix<double, N, 1>* out) {
  if (!j.contains(key)) return;
  const auto v = j.at(key).get<std::vector<double>>();
  if (static_cast<int>(v.size()) != N) {
    Bad(std::string(key) + " needs " + std::to_string(N) + " entries");
  }
  for (int i = 0; i < N; ++i) (*out)[i] = v[i];
}

template <int N>
void GetMatrix(const json& j, const char* key, Eigen::Matrix<double, N, N>* out) {
  if (!j.contains(key)) return;
  const auto rows = j.at(key).get<std::vector<std::vector<double>>>();
  if (static_cast<int>(rows.size()) != N) Bad(std::string(key) + " has wrong shape");
  for (int r = 0; r < N; ++r) {
    if (static_cast<int>(rows[r].size()) != N) Bad(std::string(key) + " has wrong shape");
    for (int c = 0; c < N; ++c) (*out)(r, c) = rows[r][c];
  }
}

template <int N>
json MatrixJson(const Eigen::Matrix<double, N, N>& m) {
  json rows = json::array();
  for (int r = 0; r < N; ++r) {
    json row = json::array();
    for (int c = 0; c < N; ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

template <int N>
json VectorJson(const Eigen::Matrix<double, N, 1>& v) {
  json a = json::array();
  for (int i = 0; i < N; ++i) a.push_back(v[i]);
  return a;
}

bool PositiveDefinite(const Eigen::Matrix2d& m) {
  return m(0, 0) > 0 && m.determinant() > 0 && std::abs(m(0, 1) - m(1, 0)) < 1e-12;
}

void ValidateConfig(const ScenarioConfig& c) {
  c.mechanism.Validate();
  if (!PositiveDefinite(c.weights.q) || !PositiveDefinite(c.weights.s) ||
      !PositiveDefinite(c.weights.l)) {
    Bad("weights Q, S, L must be symmetric positive definite");
  }
  if (!(c.weights.r > 0) || !(c.weights.c_bar > 0) || !(c.weights.cap > 0)) {
    Bad("R, barrier coefficient and cap must be positive");
  }
  if (!(c.ref_period > 0)) Bad("reference period must be positive");
  if (c.ref_amplitude && !(*c.ref_amplitude > 0)) Bad("reference amplitude must be positive");
  for (int i = 0; i < 4; ++i) {
    if (!(c.lower[i] <= c.upper[i])) Bad("bounds need lower <= upper");
  }
  if (c.lower[0] < 0 || c.lower[1] < 0 || c.upper[0] > 1 || c.upper[1] > 1) {
    Bad("stiffness bounds must lie in [0, 1]");
  }
  if (c.lower[2] < 0.01 || c.lower[3] < 0.01 || c.upper[2] > 0.03 || c.upper[3] > 0.03) {
    Bad("depth bounds must lie in [0.01, 0.03]");
  }
  if (c.solver != "pso" && c.solver != "ga") Bad("solver must be pso or ga");
  if (c.swarm.particles < 10) Bad("swarm needs at least 10 particles");
  if (c.ga.population < 20) Bad("GA population needs at least 20 individuals");
  if (c.swarm.iterations < 1 || c.ga.generations < 1) Bad("iteration budget must be positive");
  if (!(c.zd.step > 0) || c.zd.table_nodes < 16) Bad("invalid zero-dynamics settings");
  if (!(c.closed_loop.step > 0) || c.closed_loop.periods < 1 || c.closed_loop.record_every < 1) {
    Bad("invalid closed-loop settings");
  }
  if (!(c.stabilizer.r_c > 0) || (c.stabilizer.q_c_diag.array() <= 0).any()) {
    Bad("stabilizer weights must be positive");
  }
  if (c.scan_resolution < 2 || static_cast<long>(c.scan_resolution) * c.scan_resolution > 1000000) {
    Bad("scan resolution must give between 4 and 1e6 points");
  }
  if (c.design) {
    const DesignParams& p = *c.design;
    if (p.k_b < 0 || p.k_t < 0 || p.k_b > 1 || p.k_t > 1) Bad("design stiffness outside [0, 1]");
    if (p.delta_b < 0.01 || p.delta_b > 0.03 || p.delta_t < 0.01 || p.delta_t > 0.03) {
      Bad("design depth outside [0.01, 0.03]");
    }
  }
}

}  // namespace

ScenarioConfig ParseScenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    Bad(std::string("scenario is not valid JSON: ") + e.what());
  }
  ScenarioConfig c;
  try {
    CheckKeys(j, {"name", "mechanism", "reference", "feasibility_scan", "zero_dynamics",
                  "optimization", "design", "stabilizer", "closed_loop", "scan"},
              "scenario");
    Get(j, "name", &c.name);
    if (j.contains("mechanism")) {
      const json& m = j.at("mechanism");
      CheckKeys(m, {"lengths", "masses", "inertias", "density", "reference_depth", "p1", "p2",
                    "angle_map", "angle_offset", "rest_angles", "psi_selector", "branch",
                    "tolerances"},
                "mechanism");
      auto& mi = c.mechanism;
      GetArray(m, "lengths", &mi.links.length);
      GetArray(m, "masses", &mi.links.mass);
      GetArray(m, "inertias", &mi.links.inertia);
      Get(m, "density", &mi.links.density);
      Get(m, "reference_depth", &mi.links.reference_depth);
      GetVector<2>(m, "p1", &mi.p1);
      GetVector<2>(m, "p2", &mi.p2);
      GetMatrix<4>(m, "angle_map", &mi.angle_map);
      GetVector<4>(m, "angle_offset", &mi.angle_offset);
      if (m.contains("rest_angles")) {
        const json& r = m.at("rest_angles");
        CheckKeys(r, {"q3", "q4"}, "rest_angles");
        GetOpt(r, "q3", &c.q3_rest);
        GetOpt(r, "q4", &c.q4_rest);
      }
      if (m.contains("psi_selector")) {
        const auto s = m.at("psi_selector").get<std::vector<int>>();
        if (s.size() != 2) Bad("psi_selector needs two joint indices");
        mi.psi_selector = {s[0], s[1]};
      }
      if (m.contains("branch")) {
        const json& b = m.at("branch");
        CheckKeys(b, {"crank_elbow", "rocker_elbow"}, "branch");
        Get(b, "crank_elbow", &mi.crank_elbow);
        Get(b, "rocker_elbow", &mi.rocker_elbow);
      }
      if (m.contains("tolerances")) {
        const json& t = m.at("tolerances");
        CheckKeys(t, {"constraint", "newton_max_iter", "singular_partition",
                      "input_singularity", "condition_warning"},
                  "tolerances");
        Get(t, "constraint", &mi.tol.constraint);
        Get(t, "newton_max_iter", &mi.tol.newton_max_iter);
        Get(t, "singular_partition", &mi.tol.singular_partition);
        Get(t, "input_singularity", &mi.tol.input_singularity);
        Get(t, "condition_warning", &mi.tol.condition_warning);
      }
    }
    if (j.contains("reference")) {
      const json& r = j.at("reference");
      CheckKeys(r, {"x_c", "amplitude", "period", "y_bar"}, "reference");
      GetOpt(r, "x_c", &c.ref_x_c);
      GetOpt(r, "amplitude", &c.ref_amplitude);
      GetOpt(r, "y_bar", &c.ref_y_bar);
      Get(r, "period", &c.ref_period);
    }
    if (j.contains("feasibility_scan")) {
      const json& f = j.at("feasibility_scan");
      CheckKeys(f, {"y_range", "y_step", "x_range", "x_step", "amplitude_fraction", "min_abs_gy"},
                "feasibility_scan");
      if (f.contains("y_range")) {
        const auto v = f.at("y_range").get<std::vector<double>>();
        if (v.size() != 2) Bad("y_range needs two entries");
        c.feasibility.y_min = v[0];
        c.feasibility.y_max = v[1];
      }
      if (f.contains("x_range")) {
        const auto v = f.at("x_range").get<std::vector<double>>();
        if (v.size() != 2) Bad("x_range needs two entries");
        c.feasibility.x_min = v[0];
        c.feasibility.x_max = v[1];
      }
      Get(f, "y_step", &c.feasibility.y_step);
      Get(f, "x_step", &c.feasibility.x_step);
      Get(f, "amplitude_fraction", &c.feasibility.amplitude_fraction);
      Get(f, "min_abs_gy", &c.feasibility.min_abs_gy);
    }
    if (j.contains("zero_dynamics")) {
      const json& z = j.at("zero_dynamics");
      CheckKeys(z, {"step", "table_nodes", "max_orbit_duration", "domain"}, "zero_dynamics");
      Get(z, "step", &c.zd.step);
      Get(z, "table_nodes", &c.zd.table_nodes);
      Get(z, "max_orbit_duration", &c.zd.max_orbit_duration);
      if (z.contains("domain") && !z.at("domain").is_null()) {
        const auto v = z.at("domain").get<std::vector<double>>();
        if (v.size() != 2) Bad("domain needs two entries");
        c.zd.x_min = v[0];
        c.zd.x_max = v[1];
      }
    }
    if (j.contains("optimization")) {
      const json& o = j.at("optimization");
      CheckKeys(o, {"mode", "cost", "solver", "weights", "barrier", "cap", "bounds", "pso", "ga",
                    "polish", "seed"},
                "optimization");
      if (o.contains("mode")) {
        const auto mode = o.at("mode").get<std::string>();
        if (mode == "two_param") c.mode = Mode::kTwoParam;
        else if (mode == "four_param") c.mode = Mode::kFourParam;
        else Bad("mode must be two_param or four_param");
      }
      if (o.contains("cost")) {
        const auto cost = o.at("cost").get<std::string>();
        if (cost == "J1") c.cost = CostKind::kJ1;
        else if (cost == "J2") c.cost = CostKind::kJ2;
        else Bad("cost must be J1 or J2");
      }
      Get(o, "solver", &c.solver);
      if (o.contains("weights")) {
        const json& w = o.at("weights");
        CheckKeys(w, {"Q", "R", "S", "L"}, "weights");
        GetMatrix<2>(w, "Q", &c.weights.q);
        Get(w, "R", &c.weights.r);
        GetMatrix<2>(w, "S", &c.weights.s);
        GetMatrix<2>(w, "L", &c.weights.l);
      }
      Get(o, "barrier", &c.weights.c_bar);
      Get(o, "cap", &c.weights.cap);
      if (o.contains("bounds")) {
        const json& b = o.at("bounds");
        CheckKeys(b, {"lower", "upper"}, "bounds");
        GetVector<4>(b, "lower", &c.lower);
        GetVector<4>(b, "upper", &c.upper);
      }
      if (o.contains("pso")) {
        const json& p = o.at("pso");
        CheckKeys(p, {"particles", "iterations", "inertia", "cognitive", "social"}, "pso");
        Get(p, "particles", &c.swarm.particles);
        Get(p, "iterations", &c.swarm.iterations);
        Get(p, "inertia", &c.swarm.inertia);
        Get(p, "cognitive", &c.swarm.cognitive);
        Get(p, "social", &c.swarm.social);
      }
      if (o.contains("ga")) {
        const json& g = o.at("ga");
        CheckKeys(g, {"population", "generations", "tournament", "blend_alpha",
                      "mutation_sigma", "mutation_rate", "elitism"},
                  "ga");
        Get(g, "population", &c.ga.population);
        Get(g, "generations", &c.ga.generations);
        Get(g, "tournament", &c.ga.tournament);
        Get(g, "blend_alpha", &c.ga.blend_alpha);
        Get(g, "mutation_sigma", &c.ga.mutation_sigma);
        Get(g, "mutation_rate", &c.ga.mutation_rate);
        Get(g, "elitism", &c.ga.elitism);
      }
      if (o.contains("polish")) {
        const json& p = o.at("polish");
        CheckKeys(p, {"enabled", "max_evaluations", "initial_step", "x_tol", "f_tol"}, "polish");
        Get(p, "enabled", &c.polish.enabled);
        Get(p, "max_evaluations", &c.polish.max_evaluations);
        Get(p, "initial_step", &c.polish.initial_step);
        Get(p, "x_tol", &c.polish.x_tol);
        Get(p, "f_tol", &c.polish.f_tol);
      }
      Get(o, "seed", &c.seed);
    }
    if (j.contains("design") && !j.at("design").is_null()) {
      const json& d = j.at("design");
      CheckKeys(d, {"k_b", "k_t", "delta_b", "delta_t"}, "design");
      DesignParams p;
      Get(d, "k_b", &p.k_b);
      Get(d, "k_t", &p.k_t);
      Get(d, "delta_b", &p.delta_b);
      Get(d, "delta_t", &p.delta_t);
      c.design = p;
    }
    if (j.contains("stabilizer")) {
      const json& s = j.at("stabilizer");
      CheckKeys(s, {"Q_c", "R_c", "tolerance", "max_periods"}, "stabilizer");
      GetVector<3>(s, "Q_c", &c.stabilizer.q_c_diag);
      Get(s, "R_c", &c.stabilizer.r_c);
      Get(s, "tolerance", &c.stabilizer.tolerance);
      Get(s, "max_periods", &c.stabilizer.max_periods);
    }
    if (j.contains("closed_loop")) {
      const json& l = j.at("closed_loop");
      CheckKeys(l, {"step", "periods", "perturbation", "record_every"}, "closed_loop");
      Get(l, "step", &c.closed_loop.step);
      Get(l, "periods", &c.closed_loop.periods);
      Get(l, "record_every", &c.closed_loop.record_every);
      if (l.contains("perturbation")) {
        const json& p = l.at("perturbation");
        CheckKeys(p, {"x", "xdot", "e"}, "perturbation");
        Get(p, "x", &c.closed_loop.perturb_x);
        Get(p, "xdot", &c.closed_loop.perturb_xdot);
        Get(p, "e", &c.closed_loop.perturb_e);
      }
    }
    if (j.contains("scan")) {
      const json& s = j.at("scan");
      CheckKeys(s, {"resolution"}, "scan");
      Get(s, "resolution", &c.scan_resolution);
    }
  } catch (const json::exception& e) {
    Bad(std::string("scenario field has the wrong type: ") + e.what());
  }
  ValidateConfig(c);
  return c;
}

ScenarioConfig LoadScenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) Bad("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseScenario(ss.str());
}

std::string ScenarioToJson(const ScenarioConfig& c) {
  const auto& mi = c.mechanism;
  auto opt = [](const std::optional<double>& v) -> json {
    return v ? json(*v) : json(nullptr);
  };
  json j;
  j["name"] = c.name;
  j["mechanism"] = {
      {"lengths", mi.links.length},
      {"masses", mi.links.mass},
      {"inertias", mi.links.inertia},
      {"density", mi.links.density},
      {"reference_depth", mi.links.reference_depth},
      {"p1", VectorJson<2>(mi.p1)},
      {"p2", VectorJson<2>(mi.p2)},
      {"angle_map", MatrixJson<4>(mi.angle_map)},
      {"angle_offset", VectorJson<4>(mi.angle_offset)},
      {"rest_angles", {{"q3", opt(c.q3_rest)}, {"q4", opt(c.q4_rest)}}},
      {"psi_selector", {mi.psi_selector[0], mi.psi_selector[1]}},
      {"branch", {{"crank_elbow", mi.crank_elbow}, {"rocker_elbow", mi.rocker_elbow}}},
      {"tolerances",
       {{"constraint", mi.tol.constraint},
        {"newton_max_iter", mi.tol.newton_max_iter},
        {"singular_partition", mi.tol.singular_partition},
        {"input_singularity", mi.tol.input_singularity},
        {"condition_warning", mi.tol.condition_warning}}}};
  j["reference"] = {{"x_c", opt(c.ref_x_c)},
                    {"amplitude", opt(c.ref_amplitude)},
                    {"period", c.ref_period},
                    {"y_bar", opt(c.ref_y_bar)}};
  j["feasibility_scan"] = {{"y_range", {c.feasibility.y_min, c.feasibility.y_max}},
                           {"y_step", c.feasibility.y_step},
                           {"x_range", {c.feasibility.x_min, c.feasibility.x_max}},
                           {"x_step", c.feasibility.x_step},
                           {"amplitude_fraction", c.feasibility.amplitude_fraction},
                           {"min_abs_gy", c.feasibility.min_abs_gy}};
  j["zero_dynamics"] = {{"step", c.zd.step},
                        {"table_nodes", c.zd.table_nodes},
                        {"max_orbit_duration", c.zd.max_orbit_duration},
                        {"domain", c.zd.x_min && c.zd.x_max
                                       ? json({*c.zd.x_min, *c.zd.x_max})
                                       : json(nullptr)}};
  j["optimization"] = {
      {"mode", c.mode == Mode::kTwoParam ? "two_param" : "four_param"},
      {"cost", c.cost == CostKind::kJ1 ? "J1" : "J2"},
      {"solver", c.solver},
      {"weights",
       {{"Q", MatrixJson<2>(c.weights.q)},
        {"R", c.weights.r},
        {"S", MatrixJson<2>(c.weights.s)},
        {"L", MatrixJson<2>(c.weights.l)}}},
      {"barrier", c.weights.c_bar},
      {"cap", c.weights.cap},
      {"bounds", {{"lower", VectorJson<4>(c.lower)}, {"upper", VectorJson<4>(c.upper)}}},
      {"pso",
       {{"particles", c.swarm.particles},
        {"iterations", c.swarm.iterations},
        {"inertia", c.swarm.inertia},
        {"cognitive", c.swarm.cognitive},
        {"social", c.swarm.social}}},
      {"ga",
       {{"population", c.ga.population},
        {"generations", c.ga.generations},
        {"tournament", c.ga.tournament},
        {"blend_alpha", c.ga.blend_alpha},
        {"mutation_sigma", c.ga.mutation_sigma},
        {"mutation_rate", c.ga.mutation_rate},
        {"elitism", c.ga.elitism}}},
      {"polish",
       {{"enabled", c.polish.enabled},
        {"max_evaluations", c.polish.max_evaluations},
        {"initial_step", c.polish.initial_step},
        {"x_tol", c.polish.x_tol},
        {"f_tol", c.polish.f_tol}}},
      {"seed", c.seed}};
  if (c.design) {
    j["design"] = {{"k_b", c.design->k_b},
                   {"k_t", c.design->k_t},
                   {"delta_b", c.design->delta_b},
                   {"delta_t", c.design->delta_t}};
  } else {
    j["design"] = nullptr;
  }
  j["stabilizer"] = {{"Q_c", VectorJson<3>(c.stabilizer.q_c_diag)},
                     {"R_c", c.stabilizer.r_c},
                     {"tolerance", c.stabilizer.tolerance},
                     {"max_periods", c.stabilizer.max_periods}};
  j["closed_loop"] = {{"step", c.closed_loop.step},
                      {"periods", c.closed_loop.periods},
                      {"record_every", c.closed_loop.record_every},
                      {"perturbation",
                       {{"x", c.closed_loop.perturb_x},
                        {"xdot", c.closed_loop.perturb_xdot},
                        {"e", c.closed_loop.perturb_e}}}};
  j["scan"] = {{"resolution", c.scan_resolution}};
  return j.dump(2);
}

bool IsFeasiblePoint(const MechanismInstance& m, const Eigen::Vector2d& chi,
                     double min_abs_gy) {
  try {
    const Eigen::Vector4d q = Configuration(m, chi);
    ComputeKinematicJacobians(m, q);
    const Eigen::Matrix<double, 4, 2> j = TaskToJoint(m, q);
    const Eigen::Matrix4d mass = MassMatrix<double>(m, InertiaSet::FromDesign(m.links, DesignParams{}), q);
    const Eigen::Matrix2d m_chi = j.transpose() * mass * j;
    Eigen::LLT<Eigen::Matrix2d> llt(m_chi);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::Matrix2d n = m_chi.inverse();
    const Eigen::Vector2d b = j.row(0).transpose();
    const Eigen::Vector2d g = n * b;
    if (!(std::abs(g[1]) > std::max(min_abs_gy, m.tol.input_singularity))) return false;
    const Eigen::RowVector2d ell = n.row(0) - (g[0] / g[1]) * n.row(1);
    // Slope of c per unit stiffness with the spring at rest at chi.
    const double omega_b = ell.dot(j.row(3)) * j(3, 0);
    const double omega_t = ell.dot(j.row(2)) * j(2, 0);
    return omega_b > 0.0 && omega_t > 0.0;
  } catch (const ZdError&) {
    return false;
  }
}

std::optional<FeasibleLine> FeasibleRun(const MechanismInstance& m, double y,
                                        const FeasibilityScanConfig& cfg) {
  const int n = static_cast<int>(std::floor((cfg.x_max - cfg.x_min) / cfg.x_step + 1e-9)) + 1;
  int best_len = 0, best_start = 0, run = 0;
  for (int i = 0; i < n; ++i) {
    const double x = cfg.x_min + i * cfg.x_step;
    if (IsFeasiblePoint(m, Eigen::Vector2d(x, y), cfg.min_abs_gy)) {
      ++run;
      if (run > best_len) {
        best_len = run;
        best_start = i - run + 1;
      }
    } else {
      run = 0;
    }
  }
  if (best_len < 2) return std::nullopt;
  return FeasibleLine{y, cfg.x_min + best_start * cfg.x_step,
                      cfg.x_min + (best_start + best_len - 1) * cfg.x_step};
}

FeasibilityReport FeasibilityScan(const MechanismInstance& m,
                                  const FeasibilityScanConfig& cfg) {
  FeasibilityReport rep;
  const int ny = static_cast<int>(std::floor((cfg.y_max - cfg.y_min) / cfg.y_step + 1e-9)) + 1;
  double best_span = -1.0;
  for (int k = 0; k < ny; ++k) {
    const double y = cfg.y_min + k * cfg.y_step;
    const auto line = FeasibleRun(m, y, cfg);
    if (!line) continue;
    rep.lines.push_back(*line);
    if (line->x_hi - line->x_lo > best_span + 1e-12) {
      best_span = line->x_hi - line->x_lo;
      rep.best = *line;
    }
  }
  if (rep.lines.empty()) {
    throw ZdError(ErrorCode::kUnreachable, "feasibility scan found no admissible line");
  }
  return rep;
}

Scenario ResolveScenario(const ScenarioConfig& config) {
  ValidateConfig(config);
  Scenario sc;
  sc.config = config;
  MechanismInstance m = config.mechanism;

  FeasibleLine line;
  if (config.ref_y_bar) {
    const auto run = FeasibleRun(m, *config.ref_y_bar, config.feasibility);
    if (!run) {
      throw ZdError(ErrorCode::kUnreachable, "no feasible interval on the line y = y_bar");
    }
    line = *run;
  } else {
    line = FeasibilityScan(m, config.feasibility).best;
  }
  Reference& ref = sc.reference;
  ref.y_bar = line.y;
  ref.period = config.ref_period;
  ref.x_c = config.ref_x_c.value_or(0.5 * (line.x_lo + line.x_hi));
  ref.amplitude = config.ref_amplitude.value_or(
      config.feasibility.amplitude_fraction * (line.x_hi - line.x_lo));
  sc.x_min = config.zd.x_min.value_or(line.x_lo);
  sc.x_max = config.zd.x_max.value_or(line.x_hi);
  if (!(sc.x_max > sc.x_min)) throw ZdError(ErrorCode::kConfig, "empty zero-dynamics domain");
  if (ref.x_c - ref.amplitude < sc.x_min || ref.x_c + ref.amplitude > sc.x_max) {
    throw ZdError(ErrorCode::kUnreachable, "reference leaves the feasible interval");
  }

  const Eigen::Vector4d q_center = Configuration(m, Eigen::Vector2d(ref.x_c, ref.y_bar));
  m.wrap_center = q_center;
  m.q3_rest = config.q3_rest.value_or(q_center[2]);
  m.q4_rest = config.q4_rest.value_or(q_center[3]);

  std::vector<Eigen::Vector2d> samples;
  for (int k = 0; k <= 100; ++k) {
    const double t = ref.period * k / 100.0;
    const Eigen::Vector2d chi(ref.Rx(t), ref.y_bar);
    if (!IsFeasiblePoint(m, chi, config.feasibility.min_abs_gy)) {
      throw ZdError(ErrorCode::kUnreachable, "reference sample outside the feasible region");
    }
    samples.push_back(chi);
  }
  sc.selectors = ScanSelectors(m, samples);
  double own = 0.0;
  for (const auto& s : sc.selectors) {
    if (s.selector == m.psi_selector) own = s.min_abs_det;
  }
  if (!(own > m.tol.singular_partition)) {
    throw ZdError(ErrorCode::kSingularPartition,
                  "configured psi selector is singular along the reference");
  }
  if (sc.selectors.front().selector != m.psi_selector &&
      sc.selectors.front().min_abs_det > own) {
    std::fprintf(stderr,
                 "warning: psi = (q%d, q%d) is better conditioned than the configured "
                 "(q%d, q%d): %.3g vs %.3g\n",
                 sc.selectors.front().selector[0] + 1, sc.selectors.front().selector[1] + 1,
                 m.psi_selector[0] + 1, m.psi_selector[1] + 1,
                 sc.selectors.front().min_abs_det, own);
  }
  sc.mechanism = m;
  sc.table = ZdTable::Build(m, ref.y_bar, sc.x_min, sc.x_max, config.zd.table_nodes);
  return sc;
}

}  // namespace zdshape
