#include "zdshape/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

namespace zdshape {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::mt19937_64 MakeRng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  // 53-bit mantissa from one draw; avoids library-specific distribution code.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double Normal(std::mt19937_64& rng) {
  double u1 = Uniform(rng, 0.0, 1.0);
  while (u1 <= 0.0) u1 = Uniform(rng, 0.0, 1.0);
  const double u2 = Uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double BestFeasible(const Evaluation& e) { return e.feasible ? e.objective : kInf; }

}  // namespace

bool Better(const Evaluation& a, const Evaluation& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.feasible) return a.objective < b.objective;
  if (a.violation != b.violation) return a.violation < b.violation;
  return a.objective < b.objective;
}

SolverResult PsoMinimize(const ObjectiveFn& f, const Bounds& box,
                         const SwarmConfig& cfg, std::uint64_t seed) {
  if (cfg.particles < 10) throw ZdError(ErrorCode::kConfig, "swarm needs at least 10 particles");
  if (cfg.iterations < 1) throw ZdError(ErrorCode::kConfig, "swarm needs an iteration budget");
  const int n = cfg.particles, d = box.dim();
  std::vector<std::mt19937_64> rng;
  std::vector<Eigen::VectorXd> x(n), v(n), pbest(n);
  std::vector<Evaluation> px(n);
  SolverResult out;
  for (int i = 0; i < n; ++i) {
    rng.push_back(MakeRng(seed, static_cast<std::uint64_t>(i)));
    x[i].resize(d);
    v[i].resize(d);
    for (int k = 0; k < d; ++k) x[i][k] = Uniform(rng[i], box.lower[k], box.upper[k]);
    for (int k = 0; k < d; ++k) {
      v[i][k] = 0.5 * (Uniform(rng[i], box.lower[k], box.upper[k]) - x[i][k]);
    }
    pbest[i] = x[i];
    px[i] = f(x[i]);
    ++out.evaluations;
  }
  int g = 0;
  for (int i = 1; i < n; ++i) {
    if (px[i].objective < px[g].objective) g = i;
  }
  Eigen::VectorXd gbest = pbest[g];
  Evaluation gval = px[g];
  out.history.push_back(BestFeasible(gval));
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) {
        const double r1 = Uniform(rng[i], 0.0, 1.0);
        const double r2 = Uniform(rng[i], 0.0, 1.0);
        v[i][k] = cfg.inertia * v[i][k] + cfg.cognitive * r1 * (pbest[i][k] - x[i][k]) +
                  cfg.social * r2 * (gbest[k] - x[i][k]);
        x[i][k] += v[i][k];
        if (x[i][k] < box.lower[k]) {
          x[i][k] = box.lower[k];
          v[i][k] = 0.0;
        } else if (x[i][k] > box.upper[k]) {
          x[i][k] = box.upper[k];
          v[i][k] = 0.0;
        }
      }
      const Evaluation e = f(x[i]);
      ++out.evaluations;
      if (e.objective < px[i].objective) {
        px[i] = e;
        pbest[i] = x[i];
      }
    }
    for (int i = 0; i < n; ++i) {
      if (px[i].objective < gval.objective) {
        gval = px[i];
        gbest = pbest[i];
      }
    }
    out.history.push_back(BestFeasible(gval));
  }
  out.x = gbest;
  out.best = gval;
  out.termination = "iteration budget";
  return out;
}

SolverResult GaMinimize(const ObjectiveFn& f, const Bounds& box, const GaConfig& cfg,
                        std::uint64_t seed) {
  if (cfg.population < 20) throw ZdError(ErrorCode::kConfig, "GA population needs at least 20");
  if (cfg.generations < 1) throw ZdError(ErrorCode::kConfig, "GA needs a generation budget");
  if (cfg.tournament < 1 || cfg.elitism < 0 || cfg.elitism >= cfg.population) {
    throw ZdError(ErrorCode::kConfig, "invalid GA selection settings");
  }
  const int n = cfg.population, d = box.dim();
  std::mt19937_64 rng = MakeRng(seed, 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::VectorXd> pop(n);
  std::vector<Evaluation> fit(n);
  SolverResult out;
  for (int i = 0; i < n; ++i) {
    pop[i].resize(d);
    for (int k = 0; k < d; ++k) pop[i][k] = Uniform(rng, box.lower[k], box.upper[k]);
    fit[i] = f(pop[i]);
    ++out.evaluations;
  }
  auto order = [&]() {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return Better(fit[a], fit[b]); });
    return idx;
  };
  auto tournament = [&]() {
    int best = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    for (int t = 1; t < cfg.tournament; ++t) {
      const int c = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
      if (Better(fit[c], fit[best])) best = c;
    }
    return best;
  };
  std::vector<int> idx = order();
  out.history.push_back(BestFeasible(fit[idx[0]]));
  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::vector<Eigen::VectorXd> next;
    std::vector<Evaluation> next_fit;
    for (int e = 0; e < cfg.elitism; ++e) {
      next.push_back(pop[idx[e]]);
      next_fit.push_back(fit[idx[e]]);
    }
    while (static_cast<int>(next.size()) < n) {
      const Eigen::VectorXd& a = pop[tournament()];
      const Eigen::VectorXd& b = pop[tournament()];
      Eigen::VectorXd child(d);
      for (int k = 0; k < d; ++k) {
        const double lo = std::min(a[k], b[k]), hi = std::max(a[k], b[k]);
        const double ext = cfg.blend_alpha * (hi - lo);
        child[k] = Uniform(rng, lo - ext, hi + ext);
        if (Uniform(rng, 0.0, 1.0) < cfg.mutation_rate) {
          child[k] += cfg.mutation_sigma * (box.upper[k] - box.lower[k]) * Normal(rng);
        }
      }
      child = box.Clamp(child);
      next_fit.push_back(f(child));
      ++out.evaluations;
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    fit = std::move(next_fit);
    idx = order();
    out.history.push_back(BestFeasible(fit[idx[0]]));
  }
  out.x = pop[idx[0]];
  out.best = fit[idx[0]];
  out.termination = "generation budget";
  return out;
}

SolverResult NelderMead(const std::function<double(const Eigen::VectorXd&)>& f,
                        const Bounds& box, const Eigen::VectorXd& x0,
                        const PolishConfig& cfg) {
  const int d = box.dim();
  const Eigen::VectorXd span = box.upper - box.lower;
  std::vector<Eigen::VectorXd> s(d + 1);
  std::vector<double> fs(d + 1);
  SolverResult out;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++out.evaluations;
    return f(x);
  };
  s[0] = box.Clamp(x0);
  fs[0] = eval(s[0]);
  for (int k = 0; k < d; ++k) {
    Eigen::VectorXd x = s[0];
    const double h = cfg.initial_step * span[k];
    x[k] = x[k] + h <= box.upper[k] ? x[k] + h : x[k] - h;
    s[k + 1] = box.Clamp(x);
    fs[k + 1] = eval(s[k + 1]);
  }
  out.termination = "evaluation budget";
  while (out.evaluations < cfg.max_evaluations) {
    std::vector<int> idx(d + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    {
      std::vector<Eigen::VectorXd> s2(d + 1);
      std::vector<double> f2(d + 1);
      for (int k = 0; k <= d; ++k) {
        s2[k] = s[idx[k]];
        f2[k] = fs[idx[k]];
      }
      s = std::move(s2);
      fs = std::move(f2);
    }
    double diam = 0.0;
    for (int k = 1; k <= d; ++k) {
      diam = std::max(diam, ((s[k] - s[0]).array() / span.array().max(1e-300)).abs().maxCoeff());
    }
    if (diam < cfg.x_tol || std::abs(fs[d] - fs[0]) < cfg.f_tol) {
      out.termination = "converged";
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (int k = 0; k < d; ++k) centroid += s[k];
    centroid /= d;
    const Eigen::VectorXd xr = box.Clamp(centroid + (centroid - s[d]));
    const double fr = eval(xr);
    if (fr < fs[0]) {
      const Eigen::VectorXd xe = box.Clamp(centroid + 2.0 * (centroid - s[d]));
      const double fe = eval(xe);
      if (fe < fr) {
        s[d] = xe;
        fs[d] = fe;
      } else {
        s[d] = xr;
        fs[d] = fr;
      }
      continue;
    }
    if (fr < fs[d - 1]) {
      s[d] = xr;
      fs[d] = fr;
      continue;
    }
    const bool outside = fr < fs[d];
    const Eigen::VectorXd xc = outside ? box.Clamp(centroid + 0.5 * (xr - centroid))
                                       : box.Clamp(centroid + 0.5 * (s[d] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : fs[d])) {
      s[d] = xc;
      fs[d] = fc;
      continue;
    }
    for (int k = 1; k <= d; ++k) {
      s[k] = box.Clamp(s[0] + 0.5 * (s[k] - s[0]));
      fs[k] = eval(s[k]);
    }
  }
  int b = 0;
  for (int k = 1; k <= d; ++k) {
    if (fs[k] < fs[b]) b = k;
  }
  out.x = s[b];
  out.best = Evaluation{fs[b], 0.0, true};
  return out;
}

double Barrier(double omega, double c_bar, double cap) {
  if (!(omega > 0.0)) return cap;
  const double b = -c_bar * std::log(omega / (1.0 + omega));
  return std::min(b, cap);
}

double Trapezoid(const std::vector<double>& f, double h) {
  if (f.size() < 2) return 0.0;
  double s = 0.5 * (f.front() + f.back());
  for (std::size_t k = 1; k + 1 < f.size(); ++k) s += f[k];
  return s * h;
}

double TrackingCost(const Trajectory& traj, const std::function<double(double)>& rx,
                    const std::function<double(double)>& rx_dot, const CostWeights& w) {
  std::vector<double> integrand(traj.size());
  Eigen::Vector2d err = Eigen::Vector2d::Zero();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    err = {traj.x[k] - rx(traj.s[k]), traj.xdot[k] - rx_dot(traj.s[k])};
    integrand[k] = err.dot(w.q * err) + w.r * traj.tau[k] * traj.tau[k];
  }
  return Trapezoid(integrand, traj.step) + err.dot(w.s * err);
}

CostModel::CostModel(const Scenario& sc, Mode mode, CostKind kind)
    : table_(sc.table),
      ref_(sc.reference),
      w_(sc.config.weights),
      mode_(mode),
      kind_(kind),
      lower_(sc.config.lower),
      upper_(sc.config.upper),
      step_(sc.config.zd.step) {}

Bounds CostModel::bounds() const {
  const int n = dim();
  return Bounds{lower_.head(n), upper_.head(n)};
}

DesignParams CostModel::Decode(const Eigen::VectorXd& v) const {
  DesignParams p;
  p.k_b = v[0];
  p.k_t = v[1];
  if (mode_ == Mode::kFourParam) {
    p.delta_b = v[2];
    p.delta_t = v[3];
  }
  return p;
}

Eigen::VectorXd CostModel::Encode(const DesignParams& p) const {
  return p.AsVector().head(dim());
}

CostResult CostModel::Evaluate(const DesignParams& p) const {
  CostResult r;
  const MechanismZd zd(table_, p);
  try {
    r.x0 = FindEquilibrium(zd, zd.XMin(), zd.XMax(), ref_.x_c).x0;
    r.omega = Omega(zd, r.x0, zd.XMax() - zd.XMin());
  } catch (const ZdError& e) {
    r.omega = 0.0;
    r.diagnostic = e.what();
  }
  r.barrier = Barrier(r.omega, w_.c_bar, w_.cap);
  if (!(r.omega > 0.0)) {
    r.objective = r.core = r.tracking = w_.cap;
    if (r.diagnostic.empty()) r.diagnostic = "Omega <= 0";
    return r;
  }
  const Trajectory traj = SimulateZd(zd, ref_.Rx(0.0), ref_.period, step_);
  if (traj.escaped) {
    r.objective = r.core = r.tracking = w_.cap;
    r.escaped = true;
    r.diagnostic = "zero dynamics left the domain";
    return r;
  }
  const Reference ref = ref_;
  r.tracking = TrackingCost(
      traj, [&ref](double t) { return ref.Rx(t); }, [&ref](double t) { return ref.RxDot(t); },
      w_);
  if (kind_ == CostKind::kJ2) {
    const Eigen::Vector2d delta(p.delta_b - 0.01, p.delta_t - 0.01);
    r.design_term = delta.dot(w_.l * delta);
  }
  r.core = r.tracking + r.design_term;
  r.objective = std::min(r.core + r.barrier, w_.cap);
  r.feasible = true;
  return r;
}

Evaluation CostModel::BarrierObjective(const Eigen::VectorXd& v) const {
  const CostResult r = Evaluate(Decode(v));
  return Evaluation{r.objective, r.feasible ? 0.0 : 1.0 + std::max(0.0, -r.omega), r.feasible};
}

Evaluation CostModel::ConstrainedObjective(const Eigen::VectorXd& v) const {
  const CostResult r = Evaluate(Decode(v));
  return Evaluation{r.core, r.feasible ? 0.0 : 1.0 + std::max(0.0, -r.omega), r.feasible};
}

OptResult Optimize(const Scenario& sc, const std::string& solver, std::uint64_t seed) {
  const CostModel model(sc, sc.config.mode, sc.config.cost);
  return Optimize(model, sc.config, solver, seed);
}

OptResult Optimize(const CostModel& model, const ScenarioConfig& cfg, const std::string& solver,
                   std::uint64_t seed) {
  const bool pso = solver == "pso";
  if (!pso && solver != "ga") throw ZdError(ErrorCode::kConfig, "unknown solver " + solver);
  const ObjectiveFn f = [&model, pso](const Eigen::VectorXd& v) {
    return pso ? model.BarrierObjective(v) : model.ConstrainedObjective(v);
  };
  const Bounds box = model.bounds();
  SolverResult res = pso ? PsoMinimize(f, box, cfg.swarm, seed) : GaMinimize(f, box, cfg.ga, seed);
  if (!res.best.feasible) {
    throw ZdError(ErrorCode::kAllInfeasible, "no feasible design found by " + solver);
  }
  OptResult out;
  out.termination = res.termination;
  if (cfg.polish.enabled) {
    const double cap = model.weights().cap;
    const auto g = [&f, cap](const Eigen::VectorXd& v) {
      const Evaluation e = f(v);
      return e.feasible ? e.objective : cap;
    };
    const SolverResult nm = NelderMead(g, box, res.x, cfg.polish);
    res.evaluations += nm.evaluations;
    const Evaluation e = f(nm.x);
    ++res.evaluations;
    if (e.feasible && e.objective < res.best.objective) {
      res.x = nm.x;
      res.best = e;
      res.history.push_back(e.objective);
    }
    out.termination += ", polish " + nm.termination;
  }
  out.p_star = model.Decode(res.x);
  out.cost = model.Evaluate(out.p_star);
  out.j_star = pso ? out.cost.objective : out.cost.core;
  out.evaluations = res.evaluations;
  out.history = std::move(res.history);
  out.seed = seed;
  out.solver = solver;
  out.mode = model.mode();
  out.kind = model.kind();
  return out;
}

std::string OptResultToJson(const OptResult& r) {
  using nlohmann::json;
  json hist = json::array();
  for (double h : r.history) hist.push_back(std::isfinite(h) ? json(h) : json(nullptr));
  json j = {
      {"p_star",
       {{"k_b", r.p_star.k_b},
        {"k_t", r.p_star.k_t},
        {"delta_b", r.p_star.delta_b},
        {"delta_t", r.p_star.delta_t}}},
      {"J_star", r.j_star},
      {"cost",
       {{"objective", r.cost.objective},
        {"core", r.cost.core},
        {"J1", r.cost.tracking},
        {"design_term", r.cost.design_term},
        {"barrier", r.cost.barrier},
        {"omega", r.cost.omega},
        {"x0", r.cost.x0},
        {"feasible", r.cost.feasible}}},
      {"evaluations", r.evaluations},
      {"history", hist},
      {"seed", r.seed},
      {"solver", r.solver},
      {"mode", r.mode == Mode::kTwoParam ? "two_param" : "four_param"},
      {"cost_kind", r.kind == CostKind::kJ1 ? "J1" : "J2"},
      {"termination", r.termination}};
  return j.dump(2);
}

OptResult OptResultFromJson(const std::string& text) {
  using nlohmann::json;
  OptResult r;
  try {
    const json j = json::parse(text);
    const json& p = j.at("p_star");
    r.p_star.k_b = p.at("k_b").get<double>();
    r.p_star.k_t = p.at("k_t").get<double>();
    r.p_star.delta_b = p.value("delta_b", 0.02);
    r.p_star.delta_t = p.value("delta_t", 0.02);
    r.j_star = j.value("J_star", 0.0);
    if (j.contains("cost")) {
      const json& c = j.at("cost");
      r.cost.objective = c.value("objective", 0.0);
      r.cost.core = c.value("core", 0.0);
      r.cost.tracking = c.value("J1", 0.0);
      r.cost.design_term = c.value("design_term", 0.0);
      r.cost.barrier = c.value("barrier", 0.0);
      r.cost.omega = c.value("omega", 0.0);
      r.cost.x0 = c.value("x0", 0.0);
      r.cost.feasible = c.value("feasible", false);
    }
    r.evaluations = j.value("evaluations", 0L);
    if (j.contains("history")) {
      for (const auto& h : j.at("history")) r.history.push_back(h.is_null() ? kInf : h.get<double>());
    }
    r.seed = j.value("seed", std::uint64_t{0});
    r.solver = j.value("solver", std::string());
    r.mode = j.value("mode", std::string("two_param")) == "four_param" ? Mode::kFourParam
                                                                      : Mode::kTwoParam;
    r.kind = j.value("cost_kind", std::string("J1")) == "J2" ? CostKind::kJ2 : CostKind::kJ1;
    r.termination = j.value("termination", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ZdError(ErrorCode::kConfig, std::string("bad optimization result: ") + e.what());
  }
  return r;
}

namespace {

int AxisIndex(const std::string& name) {
  if (name == "kb") return 0;
  if (name == "kt") return 1;
  if (name == "db") return 2;
  if (name == "dt") return 3;
  throw ZdError(ErrorCode::kConfig, "unknown scan axis " + name + " (use kb, kt, db, dt)");
}

}  // namespace

GridScanResult GridScan(const CostModel& model, const std::string& axis_a,
                        const std::string& axis_b, int resolution,
                        const Eigen::Vector4d& lower, const Eigen::Vector4d& upper,
                        const DesignParams& base) {
  const int ia = AxisIndex(axis_a), ib = AxisIndex(axis_b);
  if (ia == ib) throw ZdError(ErrorCode::kConfig, "scan axes must differ");
  if (resolution < 2 || static_cast<long>(resolution) * resolution > 1000000) {
    throw ZdError(ErrorCode::kConfig, "scan resolution must give between 4 and 1e6 points");
  }
  GridScanResult g;
  g.axis_a = axis_a;
  g.axis_b = axis_b;
  const int n = resolution;
  for (int k = 0; k < n; ++k) {
    g.a.push_back(lower[ia] + (upper[ia] - lower[ia]) * k / (n - 1));
    g.b.push_back(lower[ib] + (upper[ib] - lower[ib]) * k / (n - 1));
  }
  g.value.resize(static_cast<std::size_t>(n) * n);
  g.omega.resize(g.value.size());
  g.feasible.resize(g.value.size());
  g.minimum.value = kInf;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      Eigen::Vector4d v = base.AsVector();
      v[ia] = g.a[i];
      v[ib] = g.b[j];
      const CostResult r = model.Evaluate(DesignParams::FromVector(v));
      const std::size_t k = static_cast<std::size_t>(j) * n + i;
      g.value[k] = r.objective;
      g.omega[k] = r.omega;
      g.feasible[k] = r.feasible;
      const GridPoint pt{i, j, g.a[i], g.b[j], r.objective};
      if (!r.feasible) g.infeasible.push_back(pt);
      if (r.feasible && r.objective < g.minimum.value) g.minimum = pt;
    }
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * n + i;
      if (!g.feasible[k]) continue;
      bool strict = true;
      for (int dj = -1; dj <= 1 && strict; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0) continue;
          const int ii = i + di, jj = j + dj;
          if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
          if (!(g.value[k] < g.value[static_cast<std::size_t>(jj) * n + ii])) {
            strict = false;
            break;
          }
        }
      }
      if (strict) g.local_minima.push_back({i, j, g.a[i], g.b[j], g.value[k]});
    }
  }
  return g;
}

}  // namespace zdshape
