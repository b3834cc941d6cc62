#include "zdshape/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace zdshape {

OrbitDistance::OrbitDistance(const Orbit& orbit, const ZdSystem& zd, int densify)
    : delta1_(orbit.delta1), delta2_(orbit.delta2) {
  if (!(delta1_ > 0.0) || !(delta2_ > 0.0)) {
    throw ZdError(ErrorCode::kDegenerateOrbit, "orbit has zero extent");
  }
  if (densify < 1 || orbit.size() < 2) {
    throw ZdError(ErrorCode::kDegenerateOrbit, "orbit needs at least two samples");
  }
  const double h = orbit.step();
  auto acc = [&zd](double x, double v) {
    double b, c;
    zd.Coefficients(x, &b, &c);
    return -b * v * v - c;
  };
  const std::size_t n = orbit.size();
  x_.reserve((n - 1) * densify + 1);
  xdot_.reserve(x_.capacity());
  double a0 = acc(orbit.x[0], orbit.xdot[0]);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double a1 = acc(orbit.x[k + 1], orbit.xdot[k + 1]);
    for (int j = 0; j < densify; ++j) {
      const double s = static_cast<double>(j) / densify;
      const double s2 = s * s, s3 = s2 * s;
      const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
      const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
      x_.push_back(h00 * orbit.x[k] + h10 * h * orbit.xdot[k] + h01 * orbit.x[k + 1] +
                   h11 * h * orbit.xdot[k + 1]);
      xdot_.push_back(h00 * orbit.xdot[k] + h10 * h * a0 + h01 * orbit.xdot[k + 1] +
                      h11 * h * a1);
    }
    a0 = a1;
  }
  x_.push_back(orbit.x.back());
  xdot_.push_back(orbit.xdot.back());
}

OrbitDistance::OrbitDistance(std::vector<double> x, std::vector<double> xdot, double delta1,
                             double delta2)
    : x_(std::move(x)), xdot_(std::move(xdot)), delta1_(delta1), delta2_(delta2) {
  if (!(delta1_ > 0.0) || !(delta2_ > 0.0)) {
    throw ZdError(ErrorCode::kDegenerateOrbit, "orbit has zero extent");
  }
  if (x_.empty() || x_.size() != xdot_.size()) {
    throw ZdError(ErrorCode::kDegenerateOrbit, "orbit samples are empty or mismatched");
  }
}

double OrbitDistance::operator()(double x, double xdot) const {
  double best = std::numeric_limits<double>::infinity();
  const double i1 = 1.0 / delta1_, i2 = 1.0 / delta2_;
  for (std::size_t k = 0; k < x_.size(); ++k) {
    const double a = (x - x_[k]) * i1, b = (xdot - xdot_[k]) * i2;
    best = std::min(best, a * a + b * b);
  }
  return std::sqrt(best);
}

namespace {

struct Deriv {
  Eigen::Vector4d ds;  // (x', y', x'', y'')
  double u = 0.0;
};

Deriv PlantRhs(const MechanismInstance& m, const DesignParams& p, const InputLaw& law, double t,
               const Eigen::Vector4d& s) {
  const Eigen::Vector2d chi = s.head<2>(), chid = s.tail<2>();
  const MinimalForm mf = ComputeMinimalForm(p, m, chi, chid);
  const PflTerms pfl = ComputePflTerms<double>(mf, chid, m.tol.input_singularity);
  Deriv d;
  d.u = law(t, chi, chid, pfl);
  d.ds << chid, pfl.f_x + pfl.g_x * d.u, pfl.f_y + pfl.g_y * d.u;
  return d;
}

}  // namespace

ClosedLoopRecord SimulatePlant(const MechanismInstance& m, const DesignParams& p,
                               const TaskState& init, double duration, const InputLaw& law,
                               const SimulationOptions& opts, const OrbitDistance* distance,
                               const MotionIntegral* integral,
                               const std::function<double(double)>& tau_ref) {
  ClosedLoopRecord rec;
  const long n = std::max(1L, std::lround(duration / opts.step));
  const double h = duration / n;
  Eigen::Vector4d s;
  s << init.chi, init.chidot;
  auto record = [&](double t, double u) {
    rec.t.push_back(t);
    rec.x.push_back(s[0]);
    rec.y.push_back(s[1]);
    rec.xdot.push_back(s[2]);
    rec.ydot.push_back(s[3]);
    rec.u.push_back(u);
    rec.integral.push_back(integral ? integral->Value(s[0], s[2]) : 0.0);
    rec.d.push_back(distance ? (*distance)(s[0], s[2]) : 0.0);
    rec.tau_ref.push_back(tau_ref ? tau_ref(t) : 0.0);
    if (opts.reconstruct_joints) {
      const Eigen::Vector4d q = Configuration(m, s.head<2>());
      rec.q.push_back(q);
      rec.constraint_residual.push_back(LoopConstraint(m, q).norm());
    } else {
      rec.q.push_back(Eigen::Vector4d::Zero());
      rec.constraint_residual.push_back(0.0);
    }
  };
  try {
    for (long k = 0;; ++k) {
      const double t = k * h;
      const Deriv k1 = PlantRhs(m, p, law, t, s);
      if (k % opts.record_every == 0 || k == n) record(t, k1.u);
      if (k == n) break;
      const Deriv k2 = PlantRhs(m, p, law, t + 0.5 * h, s + 0.5 * h * k1.ds);
      const Deriv k3 = PlantRhs(m, p, law, t + 0.5 * h, s + 0.5 * h * k2.ds);
      const Deriv k4 = PlantRhs(m, p, law, t + h, s + h * k3.ds);
      s += h / 6.0 * (k1.ds + 2.0 * k2.ds + 2.0 * k3.ds + k4.ds);
      if (!s.allFinite()) {
        throw ZdError(ErrorCode::kEscapedDomain, "state became non-finite");
      }
    }
  } catch (const ZdError& e) {
    rec.escaped = true;
    rec.diagnostic = e.what();
  }
  return rec;
}

double OrbitFeedforward(const Orbit& orbit, double t) {
  double tau = std::fmod(t, orbit.period);
  if (tau < 0) tau += orbit.period;
  const double h = orbit.step();
  const int n = static_cast<int>(orbit.size()) - 1;
  int j = std::clamp(static_cast<int>(std::floor(tau / h)), 0, n - 1);
  const double s = std::clamp((tau - j * h) / h, 0.0, 1.0);
  return (1.0 - s) * orbit.tau[j] + s * orbit.tau[j + 1];
}

Stabilization Stabilize(const Scenario& sc, const DesignParams& p) {
  Stabilization st;
  st.p = p;
  st.zd = std::make_shared<MechanismZd>(sc.table, p);
  const double x0 =
      FindEquilibrium(*st.zd, st.zd->XMin(), st.zd->XMax(), sc.reference.x_c).x0;
  st.orbit = BuildOrbit(*st.zd, sc.reference.Rx(0.0), x0, sc.config.zd.step,
                        sc.config.zd.max_orbit_duration);
  st.linearization =
      TransverseLinearization(p, sc.mechanism, sc.reference.y_bar, *st.zd, st.orbit);
  st.gramian = ControllabilityGramian(st.linearization);
  const Eigen::Matrix3d q_c = sc.config.stabilizer.q_c_diag.asDiagonal();
  RiccatiOptions ro;
  ro.tolerance = sc.config.stabilizer.tolerance;
  ro.max_periods = sc.config.stabilizer.max_periods;
  st.gain = std::make_shared<PeriodicGain>(
      SolvePeriodicRiccati(st.linearization, q_c, sc.config.stabilizer.r_c, ro));

  // Residual of the differential equation at the interior samples, with P'
  // from a fourth-order central difference.
  const auto& ps = st.gain->p();
  const int m = static_cast<int>(ps.size()) - 1;
  const double hh = st.gain->period() / m;
  const auto& lin = st.linearization;
  st.min_eig_p = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= m; ++k) {
    if (k >= 2 && k <= m - 2) {
      const Eigen::Matrix3d pd =
          (-ps[k + 2] + 8.0 * ps[k + 1] - 8.0 * ps[k - 1] + ps[k - 2]) / (12.0 * hh);
      const Eigen::Matrix3d res = pd - RiccatiRate(ps[k], lin.a[k], lin.b[k], q_c,
                                                   sc.config.stabilizer.r_c);
      st.riccati_residual = std::max(st.riccati_residual, res.norm());
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (ps[k] + ps[k].transpose()));
    st.min_eig_p = std::min(st.min_eig_p, es.eigenvalues().minCoeff());
  }
  st.integral = std::make_shared<MotionIntegral>(st.zd, st.orbit.anchor_x,
                                                 st.orbit.anchor_xdot, sc.config.zd.step);
  st.controller = std::make_shared<OrbitalController>(sc.mechanism, p, sc.reference.y_bar,
                                                      st.integral, st.gain);
  return st;
}

TaskState PerturbedInitialState(const Scenario& sc, const Stabilization& st) {
  const ClosedLoopConfig& c = sc.config.closed_loop;
  TaskState s;
  s.chi = {st.orbit.anchor_x + c.perturb_x * st.orbit.delta1,
           sc.reference.y_bar + c.perturb_e};
  s.chidot = {st.orbit.anchor_xdot + c.perturb_xdot * st.orbit.delta2, 0.0};
  return s;
}

ClosedLoopRecord ClosedLoop(const Scenario& sc, const Stabilization& st, const TaskState& init,
                            double duration) {
  const OrbitDistance dist(st.orbit, *st.zd);
  const OrbitalController& ctrl = *st.controller;
  const InputLaw law = [&ctrl](double t, const Eigen::Vector2d& chi, const Eigen::Vector2d& chid,
                               const PflTerms& pfl) {
    return ctrl.Evaluate(pfl, chi[0], chid[0], chi[1], chid[1], t).u;
  };
  SimulationOptions opts;
  opts.step = sc.config.closed_loop.step;
  opts.record_every = sc.config.closed_loop.record_every;
  const Orbit& orbit = st.orbit;
  ClosedLoopRecord rec =
      SimulatePlant(sc.mechanism, st.p, init, duration, law, opts, &dist, st.integral.get(),
                    [&orbit](double t) { return OrbitFeedforward(orbit, t); });
  for (std::size_t k = 0; k < rec.size(); ++k) rec.e.push_back(rec.y[k] - sc.reference.y_bar);
  return rec;
}

ClosedLoopSummary Summarize(const ClosedLoopRecord& rec, double period, int fit_periods) {
  ClosedLoopSummary s;
  s.period = period;
  if (rec.size() == 0) return s;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    const auto j = static_cast<std::size_t>(std::floor(rec.t[k] / period + 1e-9));
    if (rec.t[k] > 0 && std::abs(rec.t[k] - j * period) < 1e-9 * period && j > 0) {
      // A sample exactly on a period boundary closes the previous period.
      if (s.period_max_d.size() < j) s.period_max_d.resize(j, 0.0);
      s.period_max_d[j - 1] = std::max(s.period_max_d[j - 1], rec.d[k]);
      continue;
    }
    if (s.period_max_d.size() < j + 1) s.period_max_d.resize(j + 1, 0.0);
    s.period_max_d[j] = std::max(s.period_max_d[j], rec.d[k]);
  }
  const int nfit = std::min<int>(fit_periods, static_cast<int>(s.period_max_d.size()));
  if (nfit >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int k = 0; k < nfit; ++k) {
      const double y = std::log(std::max(s.period_max_d[k], 1e-300));
      sx += k;
      sy += y;
      sxx += static_cast<double>(k) * k;
      sxy += k * y;
    }
    s.slope = (nfit * sxy - sx * sy) / (nfit * sxx - sx * sx);
  }
  s.final_d = rec.d.back();
  std::size_t last_above = rec.size();
  for (std::size_t k = rec.size(); k-- > 0;) {
    if (rec.d[k] >= 1e-3) {
      last_above = k;
      break;
    }
  }
  if (last_above == rec.size()) {
    s.first_below = rec.t.front();
  } else if (last_above + 1 < rec.size()) {
    s.first_below = rec.t[last_above + 1];
  }
  return s;
}

DaeReplay ReplayThroughDae(const MechanismInstance& m, const DesignParams& p,
                           const ClosedLoopRecord& rec, double duration, double step) {
  if (rec.size() < 2) throw ZdError(ErrorCode::kConfig, "record too short to replay");
  duration = std::min(duration, rec.t.back());
  const std::vector<double>& ts = rec.t;
  const std::vector<double>& us = rec.u;
  auto u_of = [&ts, &us](double t) {
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    if (it == ts.begin()) return us.front();
    if (it == ts.end()) return us.back();
    const std::size_t j = static_cast<std::size_t>(it - ts.begin());
    const double s = (t - ts[j - 1]) / (ts[j] - ts[j - 1]);
    return (1.0 - s) * us[j - 1] + s * us[j];
  };
  TaskState init;
  init.chi = {rec.x[0], rec.y[0]};
  init.chidot = {rec.xdot[0], rec.ydot[0]};
  SimulationOptions opts;
  opts.step = step;
  opts.record_every = 1;
  opts.reconstruct_joints = false;
  const ClosedLoopRecord minimal = SimulatePlant(
      m, p, init, duration,
      [&u_of](double t, const Eigen::Vector2d&, const Eigen::Vector2d&, const PflTerms&) {
        return u_of(t);
      },
      opts);
  if (minimal.escaped) throw ZdError(ErrorCode::kEscapedDomain, minimal.diagnostic);

  const DynamicParams dp = DynamicParams::FromDesign(m, p);
  Eigen::Vector4d q = Configuration(m, init.chi);
  Eigen::Vector4d qd = TaskToJoint(m, q) * init.chidot;
  auto rhs = [&](double t, const Eigen::Vector4d& qq, const Eigen::Vector4d& vv,
                 Eigen::Vector4d* a) { *a = DaeAcceleration(dp, m, qq, vv, u_of(t)).qddot; };
  const long n = static_cast<long>(minimal.size()) - 1;
  const double h = n > 0 ? minimal.t[1] - minimal.t[0] : step;
  DaeReplay out;
  for (long k = 0;; ++k) {
    const Eigen::Vector2d chi = ForwardKinematics(m, q);
    out.max_chi_error = std::max(
        out.max_chi_error, (chi - Eigen::Vector2d(minimal.x[k], minimal.y[k])).cwiseAbs().maxCoeff());
    out.max_constraint = std::max(out.max_constraint, LoopConstraint(m, q).norm());
    ++out.samples;
    if (k == n) break;
    const double t = minimal.t[k];
    Eigen::Vector4d a1, a2, a3, a4;
    rhs(t, q, qd, &a1);
    const Eigen::Vector4d q2 = q + 0.5 * h * qd, v2 = qd + 0.5 * h * a1;
    rhs(t + 0.5 * h, q2, v2, &a2);
    const Eigen::Vector4d q3 = q + 0.5 * h * v2, v3 = qd + 0.5 * h * a2;
    rhs(t + 0.5 * h, q3, v3, &a3);
    const Eigen::Vector4d q4 = q + h * v3, v4 = qd + h * a3;
    rhs(t + h, q4, v4, &a4);
    q += h / 6.0 * (qd + 2.0 * v2 + 2.0 * v3 + v4);
    qd += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  }
  return out;
}

std::vector<double> CsvTable::Column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ZdError(ErrorCode::kConfig, "CSV has no column " + name);
  const std::size_t c = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

void WriteCsv(const std::string& path, const CsvTable& table) {
  std::string s;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c) s += ',';
    s += table.header[c];
  }
  s += '\n';
  char buf[40];
  for (const auto& r : table.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) s += ',';
      std::snprintf(buf, sizeof buf, "%.17g", r[c]);
      s += buf;
    }
    s += '\n';
  }
  WriteFile(path, s);
}

CsvTable ReadCsv(const std::string& path) {
  std::istringstream in(ReadFile(path));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ZdError(ErrorCode::kConfig, "empty CSV " + path);
  {
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) t.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.c_str();
    while (*p) {
      char* end = nullptr;
      row.push_back(std::strtod(p, &end));
      if (end == p) throw ZdError(ErrorCode::kConfig, "bad number in " + path);
      p = end;
      if (*p == ',') ++p;
    }
    if (row.size() != t.header.size()) throw ZdError(ErrorCode::kConfig, "ragged CSV " + path);
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable TrajectoryCsv(const Trajectory& traj, const MotionIntegral& integral) {
  CsvTable t{{"s", "x", "xdot", "tau", "I"}, {}};
  for (std::size_t k = 0; k < traj.size(); ++k) {
    t.rows.push_back({traj.s[k], traj.x[k], traj.xdot[k], traj.tau[k],
                      integral.Value(traj.x[k], traj.xdot[k])});
  }
  return t;
}

CsvTable ClosedLoopCsv(const ClosedLoopRecord& rec) {
  CsvTable t{{"t", "x", "xdot", "y", "ydot", "u", "tau_ref", "e", "I", "d", "q1", "q2", "q3",
              "q4", "constraint"},
             {}};
  for (std::size_t k = 0; k < rec.size(); ++k) {
    t.rows.push_back({rec.t[k], rec.x[k], rec.xdot[k], rec.y[k], rec.ydot[k], rec.u[k],
                      rec.tau_ref[k], rec.e.empty() ? 0.0 : rec.e[k], rec.integral[k], rec.d[k],
                      rec.q[k][0], rec.q[k][1], rec.q[k][2], rec.q[k][3],
                      rec.constraint_residual[k]});
  }
  return t;
}

CsvTable GainCsv(const PeriodicGain& gain, const PeriodicSystem& sys) {
  CsvTable t{{"t", "p11", "p12", "p13", "p22", "p23", "p33", "a11", "a12", "a13", "b1"}, {}};
  const int m = static_cast<int>(gain.p().size()) - 1;
  const int stride = sys.steps() / m;
  for (int k = 0; k <= m; ++k) {
    const Eigen::Matrix3d& p = gain.p()[k];
    const Eigen::Matrix3d& a = sys.a[k * stride];
    t.rows.push_back({gain.t()[k], p(0, 0), p(0, 1), p(0, 2), p(1, 1), p(1, 2), p(2, 2), a(0, 0),
                      a(0, 1), a(0, 2), sys.b[k * stride][0]});
  }
  return t;
}

CsvTable GridCsv(const GridScanResult& g) {
  CsvTable t{{g.axis_a, g.axis_b, "J", "feasible", "omega"}, {}};
  for (std::size_t j = 0; j < g.b.size(); ++j) {
    for (std::size_t i = 0; i < g.a.size(); ++i) {
      const std::size_t k = j * g.a.size() + i;
      t.rows.push_back({g.a[i], g.b[j], g.value[k], g.feasible[k] ? 1.0 : 0.0, g.omega[k]});
    }
  }
  return t;
}

CsvTable OrbitCsv(const Orbit& orbit) {
  CsvTable t{{"t", "x", "xdot", "tau"}, {}};
  for (std::size_t k = 0; k < orbit.size(); ++k) {
    t.rows.push_back({orbit.t[k], orbit.x[k], orbit.xdot[k], orbit.tau[k]});
  }
  return t;
}

namespace {

constexpr int kPanelW = 440, kPanelH = 300;
constexpr int kMarginL = 70, kMarginR = 20, kMarginT = 34, kMarginB = 46;

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string Esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

std::vector<double> Ticks(double lo, double hi, int target) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0}) {
    step = f * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) {
    out.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
  }
  return out;
}

void Panel(std::ostringstream& os, const PlotPanel& p, int ox, int oy) {
  const int w = kPanelW - kMarginL - kMarginR, h = kPanelH - kMarginT - kMarginB;
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  auto ty = [&p](double y) { return p.log_y ? std::log10(std::max(y, 1e-300)) : y; };
  for (const auto& s : p.series) {
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      xlo = std::min(xlo, s.x[k]);
      xhi = std::max(xhi, s.x[k]);
      ylo = std::min(ylo, ty(s.y[k]));
      yhi = std::max(yhi, ty(s.y[k]));
    }
  }
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  if (xhi - xlo < 1e-300) xlo -= 0.5, xhi += 0.5;
  if (yhi - ylo < 1e-12 * std::max(1.0, std::abs(yhi))) {
    const double pad = std::max(1e-12, 0.5 * std::abs(yhi));
    ylo -= pad;
    yhi += pad;
  }
  const double ypad = 0.05 * (yhi - ylo);
  ylo -= ypad;
  yhi += ypad;
  auto px = [&](double x) { return ox + kMarginL + (x - xlo) / (xhi - xlo) * w; };
  auto py = [&](double y) { return oy + kMarginT + (yhi - y) / (yhi - ylo) * h; };
  os << "<rect x=\"" << ox + kMarginL << "\" y=\"" << oy + kMarginT << "\" width=\"" << w
     << "\" height=\"" << h << "\" fill=\"none\" stroke=\"#444\"/>\n";
  os << "<text x=\"" << ox + kMarginL + w / 2 << "\" y=\"" << oy + 20
     << "\" text-anchor=\"middle\" font-size=\"13\">" << Esc(p.title) << "</text>\n";
  os << "<text x=\"" << ox + kMarginL + w / 2 << "\" y=\"" << oy + kPanelH - 8
     << "\" text-anchor=\"middle\" font-size=\"11\">" << Esc(p.x_label) << "</text>\n";
  os << "<text x=\"" << ox + 14 << "\" y=\"" << oy + kMarginT + h / 2
     << "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 " << ox + 14 << ' '
     << oy + kMarginT + h / 2 << ")\">" << Esc(p.y_label) << "</text>\n";
  for (double v : Ticks(xlo, xhi, 5)) {
    os << "<line x1=\"" << px(v) << "\" y1=\"" << oy + kMarginT + h << "\" x2=\"" << px(v)
       << "\" y2=\"" << oy + kMarginT + h + 4 << "\" stroke=\"#444\"/>"
       << "<text x=\"" << px(v) << "\" y=\"" << oy + kMarginT + h + 16
       << "\" text-anchor=\"middle\" font-size=\"10\">" << Num(v) << "</text>\n";
  }
  for (double v : Ticks(ylo, yhi, 5)) {
    const std::string label = p.log_y ? "1e" + Num(v) : Num(v);
    os << "<line x1=\"" << ox + kMarginL - 4 << "\" y1=\"" << py(v) << "\" x2=\""
       << ox + kMarginL << "\" y2=\"" << py(v) << "\" stroke=\"#444\"/>"
       << "<text x=\"" << ox + kMarginL - 6 << "\" y=\"" << py(v) + 3
       << "\" text-anchor=\"end\" font-size=\"10\">" << label << "</text>\n";
  }
  int legend = 0;
  for (const auto& s : p.series) {
    const std::size_t n = s.x.size();
    const std::size_t stride = std::max<std::size_t>(1, n / 1500);
    os << "<polyline fill=\"none\" stroke=\"" << (s.color.empty() ? "#1f77b4" : s.color)
       << "\" stroke-width=\"1.3\"" << (s.dashed ? " stroke-dasharray=\"5,3\"" : "")
       << " points=\"";
    for (std::size_t k = 0; k < n; k += stride) {
      if (!std::isfinite(s.y[k])) continue;
      os << Num(px(s.x[k])) << ',' << Num(py(ty(s.y[k]))) << ' ';
    }
    if (n > 0 && (n - 1) % stride != 0 && std::isfinite(s.y[n - 1])) {
      os << Num(px(s.x[n - 1])) << ',' << Num(py(ty(s.y[n - 1])));
    }
    os << "\"/>\n";
    if (!s.label.empty()) {
      const int lx = ox + kMarginL + w - 110, ly = oy + kMarginT + 14 + 14 * legend++;
      os << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 18 << "\" y2=\""
         << ly - 4 << "\" stroke=\"" << (s.color.empty() ? "#1f77b4" : s.color) << "\""
         << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>"
         << "<text x=\"" << lx + 22 << "\" y=\"" << ly << "\" font-size=\"10\">" << Esc(s.label)
         << "</text>\n";
    }
  }
}

std::string Viridis(double s) {
  static const double stops[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140},
                                     {94, 201, 98}, {253, 231, 37}};
  s = std::clamp(s, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(s));
  const double f = s - i;
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(stops[i][0] + f * (stops[i + 1][0] - stops[i][0])),
                static_cast<int>(stops[i][1] + f * (stops[i + 1][1] - stops[i][1])),
                static_cast<int>(stops[i][2] + f * (stops[i + 1][2] - stops[i][2])));
  return buf;
}

}  // namespace

std::string SvgFigure(const std::vector<PlotPanel>& panels, int columns) {
  columns = std::max(1, columns);
  const int rows = (static_cast<int>(panels.size()) + columns - 1) / columns;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << columns * kPanelW
     << "\" height=\"" << rows * kPanelH << "\" font-family=\"sans-serif\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t k = 0; k < panels.size(); ++k) {
    Panel(os, panels[k], static_cast<int>(k % columns) * kPanelW,
          static_cast<int>(k / columns) * kPanelH);
  }
  os << "</svg>\n";
  return os.str();
}

std::string SvgHeatmap(const CsvTable& grid, const std::string& a_name,
                       const std::string& b_name) {
  const auto a = grid.Column(a_name), b = grid.Column(b_name), v = grid.Column("J"),
             feas = grid.Column("feasible");
  std::vector<double> as = a, bs = b;
  std::sort(as.begin(), as.end());
  as.erase(std::unique(as.begin(), as.end()), as.end());
  std::sort(bs.begin(), bs.end());
  bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
  const int na = static_cast<int>(as.size()), nb = static_cast<int>(bs.size());
  std::vector<double> cell(static_cast<std::size_t>(na) * nb, std::nan(""));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const int i = static_cast<int>(std::lower_bound(as.begin(), as.end(), a[k]) - as.begin());
    const int j = static_cast<int>(std::lower_bound(bs.begin(), bs.end(), b[k]) - bs.begin());
    if (feas[k] > 0.5) {
      const double lv = std::log10(std::max(v[k], 1e-300));
      cell[static_cast<std::size_t>(j) * na + i] = lv;
      lo = std::min(lo, lv);
      hi = std::max(hi, lv);
    }
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const int size = 520, ml = 70, mt = 40, mb = 50, bar = 90;
  const double cw = static_cast<double>(size) / na, ch = static_cast<double>(size) / nb;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << ml + size + bar << "\" height=\""
     << mt + size + mb << "\" font-family=\"sans-serif\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << ml + size / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
     << "log10 cost over (" << Esc(a_name) << ", " << Esc(b_name) << ")</text>\n";
  for (int j = 0; j < nb; ++j) {
    for (int i = 0; i < na; ++i) {
      const double c = cell[static_cast<std::size_t>(j) * na + i];
      os << "<rect x=\"" << Num(ml + i * cw) << "\" y=\"" << Num(mt + size - (j + 1) * ch)
         << "\" width=\"" << Num(cw + 0.3) << "\" height=\"" << Num(ch + 0.3) << "\" fill=\""
         << (std::isnan(c) ? std::string("#bbbbbb") : Viridis((c - lo) / (hi - lo))) << "\"/>\n";
    }
  }
  for (int j = 0; j < nb; ++j) {
    for (int i = 0; i < na; ++i) {
      const double c = cell[static_cast<std::size_t>(j) * na + i];
      if (std::isnan(c)) continue;
      bool strict = true;
      for (int dj = -1; dj <= 1 && strict; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          const int ii = i + di, jj = j + dj;
          if ((di == 0 && dj == 0) || ii < 0 || jj < 0 || ii >= na || jj >= nb) continue;
          const double o = cell[static_cast<std::size_t>(jj) * na + ii];
          if (!std::isnan(o) && !(c < o)) {
            strict = false;
            break;
          }
        }
      }
      if (strict) {
        os << "<circle cx=\"" << Num(ml + (i + 0.5) * cw) << "\" cy=\""
           << Num(mt + size - (j + 0.5) * ch) << "\" r=\"4\" fill=\"none\" stroke=\"red\"/>\n";
      }
    }
  }
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << size << "\" height=\"" << size
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double t : Ticks(as.front(), as.back(), 5)) {
    const double x = ml + (t - as.front()) / (as.back() - as.front()) * (size - cw) + cw / 2;
    os << "<text x=\"" << Num(x) << "\" y=\"" << mt + size + 16
       << "\" text-anchor=\"middle\" font-size=\"10\">" << Num(t) << "</text>\n";
  }
  for (double t : Ticks(bs.front(), bs.back(), 5)) {
    const double y = mt + size - ((t - bs.front()) / (bs.back() - bs.front()) * (size - ch) + ch / 2);
    os << "<text x=\"" << ml - 6 << "\" y=\"" << Num(y + 3)
       << "\" text-anchor=\"end\" font-size=\"10\">" << Num(t) << "</text>\n";
  }
  os << "<text x=\"" << ml + size / 2 << "\" y=\"" << mt + size + 36
     << "\" text-anchor=\"middle\" font-size=\"12\">" << Esc(a_name) << "</text>\n"
     << "<text x=\"18\" y=\"" << mt + size / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
     << "transform=\"rotate(-90 18 " << mt + size / 2 << ")\">" << Esc(b_name) << "</text>\n";
  for (int k = 0; k < 100; ++k) {
    os << "<rect x=\"" << ml + size + 20 << "\" y=\"" << Num(mt + size - (k + 1) * size / 100.0)
       << "\" width=\"18\" height=\"" << Num(size / 100.0 + 0.3) << "\" fill=\""
       << Viridis(k / 99.0) << "\"/>\n";
  }
  os << "<text x=\"" << ml + size + 42 << "\" y=\"" << mt + size << "\" font-size=\"10\">"
     << Num(lo) << "</text>\n<text x=\"" << ml + size + 42 << "\" y=\"" << mt + 10
     << "\" font-size=\"10\">" << Num(hi) << "</text>\n</svg>\n";
  return os.str();
}

std::uint64_t Fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string HexHash(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ZdError(ErrorCode::kConfig, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ZdError(ErrorCode::kConfig, "cannot write " + path);
  out << content;
  if (!out) throw ZdError(ErrorCode::kConfig, "write failed for " + path);
}

std::string RunManifest::ToJson() const {
  nlohmann::ordered_json j;
  j["scenario_hash"] = scenario_hash;
  j["seed"] = seed;
  j["version"] = version;
  j["stages"] = stages;
  nlohmann::ordered_json tol = nlohmann::ordered_json::object();
  for (const auto& [name, v] : tolerances) tol[name] = v;
  j["tolerances"] = tol;
  nlohmann::ordered_json outs = nlohmann::ordered_json::array();
  for (const auto& [file, hash] : outputs) outs.push_back({{"file", file}, {"fnv1a", hash}});
  j["outputs"] = outs;
  j["status"] = status;
  if (!error.empty()) j["error"] = error;
  j["exit_code"] = exit_code;
  j["manifest_hash"] = Hash();
  return j.dump(2) + "\n";
}

std::string RunManifest::Hash() const {
  std::string s = scenario_hash + '|' + std::to_string(seed) + '|' + version + '|' + status;
  for (const auto& st : stages) s += '|' + st;
  for (const auto& [name, v] : tolerances) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    s += '|' + name + '=' + buf;
  }
  for (const auto& [file, hash] : outputs) s += '|' + file + '=' + hash;
  return HexHash(Fnv1a(s));
}

namespace {

bool Exists(const std::string& path) { return std::ifstream(path).good(); }

PlotSeries Series(const std::string& label, std::vector<double> x, std::vector<double> y,
                  const std::string& color, bool dashed = false) {
  return PlotSeries{label, std::move(x), std::move(y), color, dashed};
}

}  // namespace

std::vector<std::string> RenderReport(const std::string& dir) {
  std::vector<std::string> written;
  const std::string blue = "#1f77b4", orange = "#ff7f0e", green = "#2ca02c", red = "#d62728";
  if (Exists(dir + "/grid.csv")) {
    const CsvTable g = ReadCsv(dir + "/grid.csv");
    WriteFile(dir + "/heatmap.svg", SvgHeatmap(g, g.header[0], g.header[1]));
    written.push_back("heatmap.svg");
  }
  if (Exists(dir + "/feasibility.csv")) {
    const CsvTable f = ReadCsv(dir + "/feasibility.csv");
    const auto y = f.Column("y");
    PlotPanel panel{"feasible interval per height", "y [m]", "x [m]",
                    {Series("lower end", y, f.Column("x_lo"), blue),
                     Series("upper end", y, f.Column("x_hi"), orange)}};
    WriteFile(dir + "/feasibility.svg", SvgFigure({panel}, 1));
    written.push_back("feasibility.svg");
  }
  if (Exists(dir + "/zd.csv") && Exists(dir + "/reference.csv")) {
    const CsvTable z = ReadCsv(dir + "/zd.csv"), r = ReadCsv(dir + "/reference.csv");
    const auto s = z.Column("s"), rs = r.Column("s");
    std::vector<PlotPanel> panels;
    panels.push_back({"position", "s [s]", "x [m]",
                      {Series("zero dynamics", s, z.Column("x"), blue),
                       Series("reference", rs, r.Column("r_x"), orange, true)}});
    panels.push_back({"velocity", "s [s]", "x' [m/s]",
                      {Series("zero dynamics", s, z.Column("xdot"), blue),
                       Series("reference", rs, r.Column("r_xdot"), orange, true)}});
    panels.push_back({"phase portrait", "x [m]", "x' [m/s]",
                      {Series("zero dynamics", z.Column("x"), z.Column("xdot"), blue),
                       Series("reference", r.Column("r_x"), r.Column("r_xdot"), orange, true)}});
    panels.push_back({"feedforward torque", "s [s]", "tau [N m]",
                      {Series("", s, z.Column("tau"), green)}});
    panels.push_back({"integral of motion", "s [s]", "I", {Series("", s, z.Column("I"), red)}});
    WriteFile(dir + "/zero_dynamics.svg", SvgFigure(panels, 3));
    written.push_back("zero_dynamics.svg");
  }
  if (Exists(dir + "/gain.csv")) {
    const CsvTable g = ReadCsv(dir + "/gain.csv");
    const auto t = g.Column("t");
    std::vector<PlotPanel> panels;
    panels.push_back({"Riccati solution, diagonal", "t [s]", "P",
                      {Series("P11", t, g.Column("p11"), blue),
                       Series("P22", t, g.Column("p22"), orange),
                       Series("P33", t, g.Column("p33"), green)}});
    panels.push_back({"Riccati solution, off-diagonal", "t [s]", "P",
                      {Series("P12", t, g.Column("p12"), blue),
                       Series("P13", t, g.Column("p13"), orange),
                       Series("P23", t, g.Column("p23"), green)}});
    panels.push_back({"linearization", "t [s]", "entry",
                      {Series("A11", t, g.Column("a11"), blue),
                       Series("A12", t, g.Column("a12"), orange),
                       Series("A13", t, g.Column("a13"), green),
                       Series("B1", t, g.Column("b1"), red, true)}});
    WriteFile(dir + "/gain.svg", SvgFigure(panels, 3));
    written.push_back("gain.svg");
  }
  if (Exists(dir + "/closed_loop.csv")) {
    const CsvTable c = ReadCsv(dir + "/closed_loop.csv");
    const auto t = c.Column("t");
    std::vector<PlotPanel> panels;
    PlotPanel phase{"phase portrait", "x [m]", "x' [m/s]",
                    {Series("closed loop", c.Column("x"), c.Column("xdot"), blue)}};
    if (Exists(dir + "/orbit.csv")) {
      const CsvTable o = ReadCsv(dir + "/orbit.csv");
      phase.series.push_back(Series("orbit", o.Column("x"), o.Column("xdot"), orange, true));
    }
    panels.push_back(phase);
    panels.push_back({"output error", "t [s]", "e [m]", {Series("", t, c.Column("e"), blue)}});
    panels.push_back({"input", "t [s]", "u [N m]",
                      {Series("u", t, c.Column("u"), blue),
                       Series("orbit feedforward", t, c.Column("tau_ref"), orange, true)}});
    PlotPanel dist{"orbit distance", "t [s]", "d", {}, true};
    std::vector<double> dd = c.Column("d");
    for (double& v : dd) v = std::max(v, 1e-12);
    dist.series.push_back(Series("", t, dd, red));
    panels.push_back(dist);
    panels.push_back({"integral of motion", "t [s]", "I", {Series("", t, c.Column("I"), green)}});
    panels.push_back({"position", "t [s]", "x [m]", {Series("", t, c.Column("x"), blue)}});
    panels.push_back({"joint angles", "t [s]", "q [rad]",
                      {Series("q1", t, c.Column("q1"), blue), Series("q2", t, c.Column("q2"), orange),
                       Series("q3", t, c.Column("q3"), green), Series("q4", t, c.Column("q4"), red)}});
    panels.push_back({"output velocity", "t [s]", "y' [m/s]",
                      {Series("", t, c.Column("ydot"), blue)}});
    WriteFile(dir + "/closed_loop.svg", SvgFigure(panels, 4));
    written.push_back("closed_loop.svg");
  }
  return written;
}

}  // namespace zdshape
