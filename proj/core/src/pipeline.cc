#include "zdshape/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include <nlohmann/json.hpp>

namespace zdshape {

namespace {

using ojson = nlohmann::ordered_json;

ojson DesignJson(const DesignParams& p) {
  return {{"k_b", p.k_b}, {"k_t", p.k_t}, {"delta_b", p.delta_b}, {"delta_t", p.delta_t}};
}

// Non-finite values are written as null.
ojson Finite(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

}  // namespace

int ExitCodeFor(const ZdError& e) {
  if (e.code() == ErrorCode::kConfig) return 1;
  return IsInfeasibility(e.code()) ? 2 : 3;
}

CsvTable FeasibilityCsv(const FeasibilityReport& report) {
  CsvTable t{{"y", "x_lo", "x_hi"}, {}};
  for (const auto& l : report.lines) t.rows.push_back({l.y, l.x_lo, l.x_hi});
  return t;
}

GridScanResult ScanStage(const Scenario& sc, const std::string& axis_a,
                         const std::string& axis_b, int resolution) {
  const CostModel model(sc, sc.config.mode, sc.config.cost);
  DesignParams base;
  if (sc.config.design) base = *sc.config.design;
  return GridScan(model, axis_a, axis_b, resolution, sc.config.lower, sc.config.upper, base);
}

OptResult OptimizeStage(const Scenario& sc, const std::string& solver,
                        std::uint64_t seed) {
  if (!sc.config.design) return Optimize(sc, solver, seed);
  const CostModel model(sc, sc.config.mode, sc.config.cost);
  const DesignParams& p = *sc.config.design;
  const CostResult c = model.Evaluate(p);
  if (!c.feasible) {
    throw ZdError(ErrorCode::kAllInfeasible, "pinned design is infeasible: " + c.diagnostic);
  }
  OptResult r;
  r.p_star = p;
  r.j_star = c.core;
  r.cost = c;
  r.evaluations = 1;
  r.history = {c.core};
  r.seed = seed;
  r.solver = "pinned";
  r.mode = sc.config.mode;
  r.kind = sc.config.cost;
  r.termination = "pinned design";
  return r;
}

DesignParams DesignFor(const Scenario& sc, const std::optional<OptResult>& result) {
  if (result) return result->p_star;
  if (sc.config.design) return *sc.config.design;
  return DesignParams{};
}

ZdStageOutput SimulateZdStage(const Scenario& sc, const DesignParams& p) {
  auto zd = std::make_shared<MechanismZd>(sc.table, p);
  const Reference& ref = sc.reference;
  const double h = sc.config.zd.step;
  ZdStageOutput out;
  out.trajectory = SimulateZd(*zd, ref.Rx(0.0), ref.period, h, ref.RxDot(0.0));
  if (out.trajectory.escaped) {
    throw ZdError(ErrorCode::kEscapedDomain, "zero dynamics leave the domain within one period");
  }
  const MotionIntegral integral(zd, ref.Rx(0.0), ref.RxDot(0.0), h);
  out.zd = TrajectoryCsv(out.trajectory, integral);
  out.reference = CsvTable{{"s", "r_x", "r_xdot"}, {}};
  for (double s : out.trajectory.s) out.reference.rows.push_back({s, ref.Rx(s), ref.RxDot(s)});
  return out;
}

StabilizeDiagnostics Diagnose(const Stabilization& st) {
  StabilizeDiagnostics d;
  d.period = st.orbit.period;
  d.delta1 = st.orbit.delta1;
  d.delta2 = st.orbit.delta2;
  d.closure_error = st.orbit.closure_error;
  d.riccati_residual = st.riccati_residual;
  d.periodicity_gap = st.gain->periodicity_gap();
  d.min_eig_p = st.min_eig_p;
  d.gramian_min_eig = st.gramian.min_eig;
  d.sweeps = st.gain->sweeps();
  const OrbitalController& ctrl = *st.controller;
  for (std::size_t k = 0; k < st.orbit.size(); ++k) {
    const auto out = ctrl.Evaluate(st.orbit.x[k], st.orbit.xdot[k], ctrl.y_bar(), 0.0,
                                   st.orbit.t[k]);
    d.on_orbit_u_error = std::max(d.on_orbit_u_error, std::abs(out.u - st.orbit.tau[k]));
  }
  return d;
}

std::string StabilizeDiagnostics::ToJson(const DesignParams& p) const {
  ojson j;
  j["design"] = DesignJson(p);
  j["period"] = period;
  j["delta1"] = delta1;
  j["delta2"] = delta2;
  j["closure_error"] = closure_error;
  j["riccati_residual"] = riccati_residual;
  j["periodicity_gap"] = periodicity_gap;
  j["riccati_sweeps"] = sweeps;
  j["min_eig_p"] = min_eig_p;
  j["gramian_min_eig"] = gramian_min_eig;
  j["on_orbit_u_error"] = on_orbit_u_error;
  return j.dump(2) + "\n";
}

ClosedLoopStageOutput ClosedLoopStage(const Scenario& sc, const Stabilization& st) {
  ClosedLoopStageOutput out;
  const double duration = sc.config.closed_loop.periods * st.orbit.period;
  out.record = ClosedLoop(sc, st, PerturbedInitialState(sc, st), duration);
  out.summary = Summarize(out.record, st.orbit.period);
  out.min_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < out.record.size(); ++k) {
    out.max_constraint = std::max(out.max_constraint, out.record.constraint_residual[k]);
    out.min_d = std::min(out.min_d, out.record.d[k]);
  }
  if (out.record.escaped) {
    throw ZdError(ErrorCode::kEscapedDomain, "closed loop: " + out.record.diagnostic);
  }
  out.replay = ReplayThroughDae(sc.mechanism, st.p, out.record, st.orbit.period,
                                sc.config.closed_loop.step);
  return out;
}

std::string ClosedLoopStageOutput::ToJson() const {
  ojson j;
  j["samples"] = record.size();
  j["escaped"] = record.escaped;
  j["period"] = summary.period;
  ojson maxima = ojson::array();
  for (double v : summary.period_max_d) maxima.push_back(v);
  j["period_max_d"] = maxima;
  j["log_slope"] = summary.slope;
  j["first_below_1e-3"] = summary.first_below;
  j["final_d"] = summary.final_d;
  j["min_d"] = Finite(min_d);
  j["max_constraint_residual"] = max_constraint;
  j["dae_replay"] = {{"max_chi_error", replay.max_chi_error},
                     {"max_constraint", replay.max_constraint},
                     {"samples", replay.samples}};
  return j.dump(2) + "\n";
}

RunManifest RunScenario(const ScenarioConfig& config, const std::string& scenario_text,
                        const RunOptions& opts) {
  namespace fs = std::filesystem;
  fs::create_directories(opts.out_dir);
  RunManifest man;
  man.scenario_hash = HexHash(Fnv1a(scenario_text));
  man.seed = opts.seed;
  man.version = kVersion;
  man.tolerances = {{"riccati_tolerance", config.stabilizer.tolerance},
                    {"zd_step", config.zd.step},
                    {"closed_loop_step", config.closed_loop.step},
                    {"polish_x_tol", config.polish.x_tol},
                    {"polish_f_tol", config.polish.f_tol}};
  const std::string dir = opts.out_dir;
  std::vector<std::string> files;
  auto write_csv = [&](const std::string& name, const CsvTable& t) {
    WriteCsv(dir + "/" + name, t);
    files.push_back(name);
  };
  auto write_text = [&](const std::string& name, const std::string& text) {
    WriteFile(dir + "/" + name, text);
    files.push_back(name);
  };
  try {
    const Scenario sc = ResolveScenario(config);
    write_text("scenario.resolved.json", ScenarioToJson(sc.config));

    write_csv("feasibility.csv", FeasibilityCsv(FeasibilityScan(sc.mechanism, sc.config.feasibility)));
    man.stages.push_back("feasibility");

    const std::string solver = opts.solver.empty() ? sc.config.solver : opts.solver;
    const OptResult opt = OptimizeStage(sc, solver, opts.seed);
    write_text("result.json", OptResultToJson(opt));
    if (opts.grid_scan) {
      write_csv("grid.csv", GridCsv(ScanStage(sc, "kb", "kt", sc.config.scan_resolution)));
    }
    man.stages.push_back("optimize");

    const DesignParams p = opt.p_star;
    const ZdStageOutput zd = SimulateZdStage(sc, p);
    write_csv("zd.csv", zd.zd);
    write_csv("reference.csv", zd.reference);
    man.stages.push_back("simulate-zd");

    const Stabilization st = Stabilize(sc, p);
    write_csv("orbit.csv", OrbitCsv(st.orbit));
    write_csv("gain.csv", GainCsv(*st.gain, st.linearization));
    write_text("stabilize.json", Diagnose(st).ToJson(p));
    man.stages.push_back("stabilize");

    const ClosedLoopStageOutput cl = ClosedLoopStage(sc, st);
    write_csv("closed_loop.csv", ClosedLoopCsv(cl.record));
    write_text("closed_loop.json", cl.ToJson());
    man.stages.push_back("closed-loop");

    for (const auto& f : RenderReport(dir)) files.push_back(f);
    man.stages.push_back("report");
  } catch (const ZdError& e) {
    man.status = "failed";
    man.error = e.what();
    man.exit_code = ExitCodeFor(e);
  }
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  for (const auto& f : files) man.outputs.emplace_back(f, HexHash(Fnv1a(ReadFile(dir + "/" + f))));
  WriteFile(dir + "/manifest.json", man.ToJson());
  return man;
}

}  // namespace zdshape
