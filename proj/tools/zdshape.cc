#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "zdshape/pipeline.hpp"

namespace fs = std::filesystem;
using namespace zdshape;

namespace {

struct Common {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string result;
};

std::vector<std::string> Split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void EnsureParent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string InDir(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

Scenario Load(const Common& c) {
  ScenarioConfig cfg = LoadScenario(c.scenario);
  if (c.seed) cfg.seed = *c.seed;
  return ResolveScenario(cfg);
}

// Design from --result when given, else the scenario's pinned design or the default.
DesignParams Design(const Common& c, const Scenario& sc) {
  if (c.result.empty()) return DesignFor(sc, std::nullopt);
  return OptResultFromJson(ReadFile(c.result)).p_star;
}

int RunScan(const Common& c, const std::string& axes, int res) {
  const Scenario sc = Load(c);
  const auto names = Split(axes, ',');
  if (names.size() != 2) throw ZdError(ErrorCode::kConfig, "--axes needs two names, e.g. kb,kt");
  const GridScanResult g = ScanStage(sc, names[0], names[1], res);
  const CsvTable table = GridCsv(g);
  std::string csv = "grid.csv", svg;
  for (const auto& f : Split(c.out, ',')) {
    if (fs::path(f).extension() == ".svg") svg = f;
    else csv = f;
  }
  EnsureParent(csv);
  WriteCsv(csv, table);
  if (!svg.empty()) {
    EnsureParent(svg);
    WriteFile(svg, SvgHeatmap(table, g.axis_a, g.axis_b));
  }
  std::printf("grid %dx%d  min J = %.10g at (%s, %s) = (%.6g, %.6g)  local minima: %zu  infeasible: %zu\n",
              res, res, g.minimum.value, g.axis_a.c_str(), g.axis_b.c_str(), g.minimum.a,
              g.minimum.b, g.local_minima.size(), g.infeasible.size());
  return 0;
}

int RunOptimize(const Common& c, const std::string& solver_flag) {
  const Scenario sc = Load(c);
  const std::string solver = solver_flag.empty() ? sc.config.solver : solver_flag;
  const OptResult r = OptimizeStage(sc, solver, sc.config.seed);
  const std::string out = c.out.empty() ? "result.json" : c.out;
  EnsureParent(out);
  WriteFile(out, OptResultToJson(r));
  std::printf("%s: k_b = %.10g  k_t = %.10g  delta_b = %.6g  delta_t = %.6g  J* = %.10g  (%ld evaluations)\n",
              r.solver.c_str(), r.p_star.k_b, r.p_star.k_t, r.p_star.delta_b, r.p_star.delta_t,
              r.j_star, r.evaluations);
  return 0;
}

int RunSimulateZd(const Common& c, const std::string& reference_out) {
  const Scenario sc = Load(c);
  const ZdStageOutput z = SimulateZdStage(sc, Design(c, sc));
  const std::string out = c.out.empty() ? "zd.csv" : c.out;
  EnsureParent(out);
  WriteCsv(out, z.zd);
  if (!reference_out.empty()) {
    EnsureParent(reference_out);
    WriteCsv(reference_out, z.reference);
  }
  std::printf("zero dynamics: %zu samples over %.6g s\n", z.trajectory.size(),
              z.trajectory.s.back());
  return 0;
}

int RunStabilize(const Common& c) {
  const Scenario sc = Load(c);
  const DesignParams p = Design(c, sc);
  const Stabilization st = Stabilize(sc, p);
  const StabilizeDiagnostics d = Diagnose(st);
  const std::string dir = c.out.empty() ? "." : c.out;
  WriteCsv(InDir(dir, "gain.csv"), GainCsv(*st.gain, st.linearization));
  WriteCsv(InDir(dir, "orbit.csv"), OrbitCsv(st.orbit));
  WriteFile(InDir(dir, "stabilize.json"), d.ToJson(p));
  std::printf("period %.10g s  Riccati residual %.3g  periodicity gap %.3g  min eig P %.6g\n",
              d.period, d.riccati_residual, d.periodicity_gap, d.min_eig_p);
  return 0;
}

int RunClosedLoop(const Common& c, std::optional<int> periods) {
  ScenarioConfig cfg = LoadScenario(c.scenario);
  if (c.seed) cfg.seed = *c.seed;
  if (periods) cfg.closed_loop.periods = *periods;
  const Scenario sc = ResolveScenario(cfg);
  const Stabilization st = Stabilize(sc, Design(c, sc));
  const ClosedLoopStageOutput cl = ClosedLoopStage(sc, st);
  const std::string dir = c.out.empty() ? "." : c.out;
  WriteCsv(InDir(dir, "closed_loop.csv"), ClosedLoopCsv(cl.record));
  WriteCsv(InDir(dir, "orbit.csv"), OrbitCsv(st.orbit));
  WriteFile(InDir(dir, "closed_loop.json"), cl.ToJson());
  std::printf("final d %.3g  log slope %.3g  DAE replay error %.3g\n", cl.summary.final_d,
              cl.summary.slope, cl.replay.max_chi_error);
  return 0;
}

int RunReport(const Common& c, const std::string& solver, bool from_csv, bool no_grid) {
  const std::string dir = c.out.empty() ? "report" : c.out;
  if (from_csv) {
    for (const auto& f : RenderReport(dir)) std::printf("%s\n", f.c_str());
    return 0;
  }
  const std::string text = ReadFile(c.scenario);
  ScenarioConfig cfg = ParseScenario(text);
  RunOptions opts;
  opts.out_dir = dir;
  opts.seed = c.seed.value_or(cfg.seed);
  opts.solver = solver;
  opts.grid_scan = !no_grid;
  const RunManifest man = RunScenario(cfg, text, opts);
  std::printf("%s: %zu stages, %zu outputs, manifest %s\n", man.status.c_str(),
              man.stages.size(), man.outputs.size(), man.Hash().c_str());
  if (!man.error.empty()) std::fprintf(stderr, "%s\n", man.error.c_str());
  return man.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zdshape: spring design and orbital stabilization of a five-bar mechanism"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&c](CLI::App* sub, bool need_scenario = true) {
    auto* opt = sub->add_option("--scenario", c.scenario, "scenario JSON file");
    if (need_scenario) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "random seed (overrides the scenario)");
    sub->add_option("--out", c.out, "output file or directory");
  };

  std::string axes = "kb,kt";
  int res = 200;
  auto* scan = app.add_subcommand("scan", "cost landscape over two design axes");
  add_common(scan);
  scan->add_option("--axes", axes, "two of kb, kt, db, dt");
  scan->add_option("--res", res, "samples per axis")->check(CLI::Range(2, 100000));

  std::string solver;
  auto* optimize = app.add_subcommand("optimize", "minimize the design cost");
  add_common(optimize);
  optimize->add_option("--solver", solver, "pso or ga")->check(CLI::IsMember({"pso", "ga"}));

  std::string reference_out;
  auto* simzd = app.add_subcommand("simulate-zd", "simulate the zero dynamics of a design");
  add_common(simzd);
  simzd->add_option("--result", c.result, "optimizer result JSON")->check(CLI::ExistingFile);
  simzd->add_option("--reference-out", reference_out, "also write the reference as CSV");

  auto* stabilize = app.add_subcommand("stabilize", "periodic Riccati gain for a design");
  add_common(stabilize);
  stabilize->add_option("--result", c.result, "optimizer result JSON")->check(CLI::ExistingFile);

  std::optional<int> periods;
  auto* closed = app.add_subcommand("closed-loop", "closed-loop simulation from the perturbed anchor");
  add_common(closed);
  closed->add_option("--result", c.result, "optimizer result JSON")->check(CLI::ExistingFile);
  closed->add_option("--periods", periods, "number of orbit periods")->check(CLI::PositiveNumber);

  bool from_csv = false, no_grid = false;
  auto* report = app.add_subcommand("report", "run every stage and render the figures");
  add_common(report, false);
  report->add_option("--solver", solver, "pso or ga")->check(CLI::IsMember({"pso", "ga"}));
  report->add_flag("--from-csv", from_csv, "only re-render the SVG figures from the CSVs in --out");
  report->add_flag("--no-grid", no_grid, "skip the cost landscape scan");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*scan) return RunScan(c, axes, res);
    if (*optimize) return RunOptimize(c, solver);
    if (*simzd) return RunSimulateZd(c, reference_out);
    if (*stabilize) return RunStabilize(c);
    if (*closed) return RunClosedLoop(c, periods);
    if (*report) {
      if (!from_csv && c.scenario.empty()) {
        std::cerr << "report: --scenario is required unless --from-csv is given\n";
        return 1;
      }
      return RunReport(c, solver, from_csv, no_grid);
    }
  } catch (const ZdError& e) {
    std::cerr << e.what() << "\n";
    return ExitCodeFor(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
