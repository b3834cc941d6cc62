#include "zdshape/zero_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace zdshape {

HermiteTable::HermiteTable(double x0, double h, int cols,
                           std::vector<double> values,
                           std::vector<double> slopes)
    : x0_(x0),
      h_(h),
      nodes_(static_cast<int>(values.size()) / cols),
      cols_(cols),
      values_(std::move(values)),
      slopes_(std::move(slopes)) {
  if (nodes_ < 2 || static_cast<int>(slopes_.size()) != nodes_ * cols_) {
    throw ZdError(ErrorCode::kConfig, "Hermite table needs matching node data");
  }
}

void HermiteTable::Evaluate(double x, double* out) const {
  double u = (x - x0_) / h_;
  int i = static_cast<int>(std::floor(u));
  i = std::clamp(i, 0, nodes_ - 2);
  const double t = std::clamp(u - i, 0.0, 1.0);
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = (t3 - 2 * t2 + t) * h_;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = (t3 - t2) * h_;
  const double* v0 = &values_[static_cast<std::size_t>(i) * cols_];
  const double* v1 = v0 + cols_;
  const double* d0 = &slopes_[static_cast<std::size_t>(i) * cols_];
  const double* d1 = d0 + cols_;
  for (int c = 0; c < cols_; ++c) {
    out[c] = h00 * v0[c] + h10 * d0[c] + h01 * v1[c] + h11 * d1[c];
  }
}

void HermiteTable::EvaluateSlope(double x, double* out) const {
  double u = (x - x0_) / h_;
  int i = static_cast<int>(std::floor(u));
  i = std::clamp(i, 0, nodes_ - 2);
  const double t = std::clamp(u - i, 0.0, 1.0);
  const double t2 = t * t;
  const double d00 = (6 * t2 - 6 * t) / h_;
  const double d10 = 3 * t2 - 4 * t + 1;
  const double d01 = (-6 * t2 + 6 * t) / h_;
  const double d11 = 3 * t2 - 2 * t;
  const double* v0 = &values_[static_cast<std::size_t>(i) * cols_];
  const double* v1 = v0 + cols_;
  const double* s0 = &slopes_[static_cast<std::size_t>(i) * cols_];
  const double* s1 = s0 + cols_;
  for (int c = 0; c < cols_; ++c) {
    out[c] = d00 * v0[c] + d10 * s0[c] + d01 * v1[c] + d11 * s1[c];
  }
}

std::shared_ptr<const ZdTable> ZdTable::Build(const MechanismInstance& m,
                                              double y_bar, double x_lo,
                                              double x_hi, int nodes) {
  using D = Dual<double>;
  if (!(x_hi > x_lo) || nodes < 2) {
    throw ZdError(ErrorCode::kConfig, "zero-dynamics table needs x_hi > x_lo");
  }
  auto table = std::make_shared<ZdTable>();
  table->instance_ = m;
  table->y_bar_ = y_bar;
  const double h = (x_hi - x_lo) / (nodes - 1);
  std::vector<double> values(static_cast<std::size_t>(nodes) * kCols);
  std::vector<double> slopes(values.size());

  InertiaSet groups[3];
  groups[0] = InertiaSet::SingleBody(m.links, 0);
  groups[0].mass[1] = m.links.mass[1];
  groups[0].inertia[1] = m.links.inertia[1];
  groups[1] = InertiaSet::SingleBody(m.links, 2);
  groups[2] = InertiaSet::SingleBody(m.links, 3);

  for (int i = 0; i < nodes; ++i) {
    const double x = x_lo + h * i;
    const Vec2<D> chi(D(x, 1.0), D(y_bar, 0.0));
    const Vec2<D> chidot(D(1.0, 0.0), D(0.0, 0.0));
    D col[kCols];
    MinimalFormT<D> base;
    for (int g = 0; g < 3; ++g) {
      const MinimalFormT<D> mf =
          ComputeMinimalForm<D>(m, DynamicParams{groups[g], 0.0, 0.0}, chi, chidot);
      col[5 * g + 0] = mf.m_chi(0, 0);
      col[5 * g + 1] = mf.m_chi(0, 1);
      col[5 * g + 2] = mf.m_chi(1, 1);
      col[5 * g + 3] = mf.c_chi(0, 0);
      col[5 * g + 4] = mf.c_chi(1, 0);
      if (g == 0) base = mf;
    }
    const D d4 = base.q[3] - D(m.q4_rest);
    const D d3 = base.q[2] - D(m.q3_rest);
    col[15] = base.j(3, 0) * d4;
    col[16] = base.j(3, 1) * d4;
    col[17] = base.j(2, 0) * d3;
    col[18] = base.j(2, 1) * d3;
    col[19] = base.j(0, 0);
    col[20] = base.j(0, 1);
    for (int c = 0; c < kCols; ++c) {
      values[static_cast<std::size_t>(i) * kCols + c] = col[c].value();
      slopes[static_cast<std::size_t>(i) * kCols + c] = col[c].deriv();
    }
  }
  table->table_ = HermiteTable(x_lo, h, kCols, std::move(values), std::move(slopes));
  return table;
}

ZdTable::Terms ZdTable::Evaluate(const DesignParams& p, double x) const {
  double v[kCols];
  table_.Evaluate(x, v);
  const double s3 = p.delta_t / instance_.links.reference_depth;
  const double s4 = p.delta_b / instance_.links.reference_depth;
  const double w[3] = {1.0, s3, s4};
  Terms t;
  t.m_chi.setZero();
  t.quad.setZero();
  for (int g = 0; g < 3; ++g) {
    const double* c = v + 5 * g;
    t.m_chi(0, 0) += w[g] * c[0];
    t.m_chi(0, 1) += w[g] * c[1];
    t.m_chi(1, 1) += w[g] * c[2];
    t.quad[0] += w[g] * c[3];
    t.quad[1] += w[g] * c[4];
  }
  t.m_chi(1, 0) = t.m_chi(0, 1);
  t.g_chi = Eigen::Vector2d(p.k_b * v[15] + p.k_t * v[17],
                            p.k_b * v[16] + p.k_t * v[18]);
  t.b_chi = Eigen::Vector2d(v[19], v[20]);
  return t;
}

MechanismZd::MechanismZd(std::shared_ptr<const ZdTable> table,
                         const DesignParams& p)
    : table_(std::move(table)), p_(p) {
  // Validates the depths against the admissible box.
  LinkInertiaFromDepth(table_->links(), p.delta_t, 3);
  LinkInertiaFromDepth(table_->links(), p.delta_b, 4);
  s3_ = p.delta_t / table_->links().reference_depth;
  s4_ = p.delta_b / table_->links().reference_depth;
}

namespace {

struct Projection {
  Eigen::RowVector2d ell;  // annihilates B, normalized so ell M e_x = 1
  Eigen::RowVector2d n_y;  // second row of M^{-1}
  double g_y;
};

Projection Project(const ZdTable::Terms& t, double input_tol) {
  const double det = t.m_chi(0, 0) * t.m_chi(1, 1) - t.m_chi(0, 1) * t.m_chi(1, 0);
  Eigen::Matrix2d n;
  n << t.m_chi(1, 1) / det, -t.m_chi(0, 1) / det, -t.m_chi(1, 0) / det,
      t.m_chi(0, 0) / det;
  const Eigen::Vector2d g = n * t.b_chi;
  if (!(std::abs(g[1]) > input_tol)) {
    throw ZdError(ErrorCode::kInputSingularity, "g_y vanishes on the table");
  }
  Projection p;
  p.ell = n.row(0) - (g[0] / g[1]) * n.row(1);
  p.n_y = n.row(1);
  p.g_y = g[1];
  return p;
}

}  // namespace

void MechanismZd::Coefficients(double x, double* b, double* c) const {
  const ZdTable::Terms t = table_->Evaluate(p_, x);
  const Projection pr = Project(t, table_->instance().tol.input_singularity);
  *b = pr.ell.dot(t.quad);
  *c = pr.ell.dot(t.g_chi);
}

double MechanismZd::Feedforward(double x, double xdot) const {
  const ZdTable::Terms t = table_->Evaluate(p_, x);
  const Projection pr = Project(t, table_->instance().tol.input_singularity);
  return pr.n_y.dot(xdot * xdot * t.quad + t.g_chi) / pr.g_y;
}

ZdCoefficientsResult ZdCoefficients(const DesignParams& p,
                                    const MechanismInstance& m, double y_bar,
                                    double x) {
  const Eigen::Vector2d chi(x, y_bar);
  double rhs[3];
  for (int k = 0; k < 3; ++k) {
    const PflTerms t = ComputePflTerms(p, m, chi, Eigen::Vector2d(k, 0.0));
    rhs[k] = t.f_x + t.g_x * t.tau0;
  }
  ZdCoefficientsResult out;
  out.c = -rhs[0];
  out.b = -(rhs[1] - rhs[0]);
  out.structure_residual = std::abs(rhs[2] - rhs[0] - 4.0 * (rhs[1] - rhs[0]));
  if (out.structure_residual > 1e-8) {
    std::ostringstream os;
    os << "acceleration is not quadratic in x' at x = " << x << " (residual "
       << out.structure_residual << ")";
    throw ZdError(ErrorCode::kStructureError, os.str());
  }
  return out;
}

double FeedforwardDirect(const DesignParams& p, const MechanismInstance& m,
                         double y_bar, double x, double xdot) {
  return ComputePflTerms(p, m, Eigen::Vector2d(x, y_bar),
                         Eigen::Vector2d(xdot, 0.0))
      .tau0;
}

void DirectZd::Coefficients(double x, double* b, double* c) const {
  const ZdCoefficientsResult r = ZdCoefficients(p_, m_, y_bar_, x);
  *b = r.b;
  *c = r.c;
}

double DirectZd::Feedforward(double x, double xdot) const {
  return FeedforwardDirect(p_, m_, y_bar_, x, xdot);
}

EquilibriumResult FindEquilibrium(const ZdSystem& zd, double lo, double hi,
                                  double x_center, int subdivisions) {
  if (!(hi > lo) || subdivisions < 1) {
    throw ZdError(ErrorCode::kDomain, "empty equilibrium search interval");
  }
  std::vector<double> xs(subdivisions + 1), cs(subdivisions + 1);
  double c_max = 0.0;
  for (int k = 0; k <= subdivisions; ++k) {
    xs[k] = lo + (hi - lo) * k / subdivisions;
    cs[k] = zd.C(xs[k]);
    c_max = std::max(c_max, std::abs(cs[k]));
  }
  if (c_max == 0.0) {
    throw ZdError(ErrorCode::kNoEquilibrium,
                  "c vanishes identically (no restoring force)");
  }
  EquilibriumResult out;
  for (int k = 0; k <= subdivisions; ++k) {
    if (cs[k] == 0.0) {
      out.roots.push_back(xs[k]);
      continue;
    }
    if (k == subdivisions || cs[k + 1] == 0.0 || (cs[k] > 0) == (cs[k + 1] > 0)) {
      continue;
    }
    double a = xs[k], b = xs[k + 1], ca = cs[k];
    double mid = 0.5 * (a + b);
    for (int it = 0; it < 200; ++it) {
      mid = 0.5 * (a + b);
      const double cm = zd.C(mid);
      if (cm == 0.0 || (std::abs(cm) < 1e-13 && b - a < 1e-12)) break;
      if ((cm > 0) == (ca > 0)) {
        a = mid;
        ca = cm;
      } else {
        b = mid;
      }
      if (b - a <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) {
        mid = std::abs(zd.C(a)) < std::abs(zd.C(b)) ? a : b;
        break;
      }
    }
    out.roots.push_back(mid);
  }
  if (out.roots.empty()) {
    throw ZdError(ErrorCode::kNoEquilibrium, "c has no sign change on the interval");
  }
  out.x0 = *std::min_element(out.roots.begin(), out.roots.end(),
                             [&](double u, double v) {
                               return std::abs(u - x_center) < std::abs(v - x_center);
                             });
  return out;
}

double Omega(const ZdSystem& zd, double x0, double span) {
  const double h = 1e-5 * span;
  auto d = [&](double step) {
    return (zd.C(x0 + step) - zd.C(x0 - step)) / (2.0 * step);
  };
  return (4.0 * d(0.5 * h) - d(h)) / 3.0;
}

namespace {

struct ZdRhs {
  const ZdSystem& zd;
  bool ok = true;
  void operator()(double x, double v, double* dx, double* dv) {
    if (!zd.Contains(x) || !std::isfinite(v)) {
      ok = false;
      *dx = *dv = 0.0;
      return;
    }
    double b, c;
    zd.Coefficients(x, &b, &c);
    *dx = v;
    *dv = -b * v * v - c;
  }
};

// One RK4 step; returns false if any stage left the domain.
bool Rk4Step(ZdRhs& f, double h, double* x, double* v) {
  double k1x, k1v, k2x, k2v, k3x, k3v, k4x, k4v;
  f(*x, *v, &k1x, &k1v);
  f(*x + 0.5 * h * k1x, *v + 0.5 * h * k1v, &k2x, &k2v);
  f(*x + 0.5 * h * k2x, *v + 0.5 * h * k2v, &k3x, &k3v);
  f(*x + h * k3x, *v + h * k3v, &k4x, &k4v);
  if (!f.ok) return false;
  *x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
  *v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
  return f.zd.Contains(*x);
}

}  // namespace

Trajectory SimulateZd(const ZdSystem& zd, double x_init, double duration,
                      double step, double xdot_init) {
  if (!zd.Contains(x_init)) {
    throw ZdError(ErrorCode::kEscapedDomain, "initial x outside the domain");
  }
  const long n = std::max(1L, std::lround(duration / step));
  const double h = duration / n;
  Trajectory tr;
  tr.step = h;
  tr.s.reserve(n + 1);
  tr.x.reserve(n + 1);
  tr.xdot.reserve(n + 1);
  tr.tau.reserve(n + 1);
  double x = x_init, v = xdot_init;
  ZdRhs f{zd};
  for (long k = 0;; ++k) {
    tr.s.push_back(k * h);
    tr.x.push_back(x);
    tr.xdot.push_back(v);
    tr.tau.push_back(zd.Feedforward(x, v));
    if (k == n) break;
    double xn = x, vn = v;
    if (!Rk4Step(f, h, &xn, &vn)) {
      tr.escaped = true;
      break;
    }
    x = xn;
    v = vn;
  }
  return tr;
}

namespace {

std::vector<std::pair<double, double>> Crossings(const Trajectory& tr) {
  // (time, x) of sign changes of x' after the initial sample.
  std::vector<std::pair<double, double>> out;
  int last_sign = 0;
  std::size_t last_k = 0;
  for (std::size_t k = 1; k < tr.size(); ++k) {
    const double v = tr.xdot[k];
    const int s = v > 0 ? 1 : (v < 0 ? -1 : 0);
    if (s == 0) continue;
    if (last_sign != 0 && s != last_sign) {
      const double v0 = tr.xdot[last_k];
      const double w = v0 / (v0 - v);
      const double t = tr.s[last_k] + w * (tr.s[k] - tr.s[last_k]);
      const double x = tr.x[last_k] + w * (tr.x[k] - tr.x[last_k]);
      out.emplace_back(t, x);
    }
    last_sign = s;
    last_k = k;
  }
  return out;
}

}  // namespace

double DetectPeriod(const Trajectory& traj, double x0) {
  if (traj.size() < 3) throw ZdError(ErrorCode::kNotPeriodic, "trajectory too short");
  const double side0 = traj.x[0] - x0;
  const auto cr = Crossings(traj);
  if (cr.size() < 2 || side0 == 0.0) {
    throw ZdError(ErrorCode::kNotPeriodic, "fewer than two returns to x' = 0");
  }
  if ((cr[1].second - x0 > 0) != (side0 > 0)) {
    throw ZdError(ErrorCode::kNotPeriodic,
                  "second turning point lies on the opposite side of x0");
  }
  return cr[1].first;
}

namespace {

// x' after integrating exactly one candidate period with n steps.
double EndVelocity(const ZdSystem& zd, double x_anchor, double period, long n) {
  ZdRhs f{zd};
  double x = x_anchor, v = 0.0;
  const double h = period / n;
  for (long k = 0; k < n; ++k) {
    if (!Rk4Step(f, h, &x, &v)) {
      throw ZdError(ErrorCode::kEscapedDomain, "orbit leaves the domain");
    }
  }
  return v;
}

}  // namespace

Orbit BuildOrbit(const ZdSystem& zd, double x_anchor, double x0, double step,
                 double max_duration) {
  double horizon = std::min(2.0, max_duration);
  double t_est = 0.0;
  for (;;) {
    const Trajectory tr = SimulateZd(zd, x_anchor, horizon, step);
    try {
      t_est = DetectPeriod(tr, x0);
      break;
    } catch (const ZdError&) {
      if (tr.escaped) {
        throw ZdError(ErrorCode::kEscapedDomain, "zero dynamics leave the domain before closing");
      }
      if (horizon >= max_duration) throw;
      horizon = std::min(2.0 * horizon, max_duration);
    }
  }
  const long n = std::max(2L, 2 * std::lround(t_est / (2.0 * step)));
  // Secant on the end velocity so that the discrete flow closes.
  double t0 = t_est, t1 = t_est * (1.0 + 1e-7);
  double f0 = EndVelocity(zd, x_anchor, t0, n);
  double f1 = EndVelocity(zd, x_anchor, t1, n);
  for (int it = 0; it < 30 && f1 != f0 && std::abs(f1) > 1e-15; ++it) {
    const double t2 = t1 - f1 * (t1 - t0) / (f1 - f0);
    t0 = t1;
    f0 = f1;
    t1 = t2;
    f1 = EndVelocity(zd, x_anchor, t1, n);
  }
  const double period = std::abs(f1) <= std::abs(f0) ? t1 : t0;
  if (!(std::abs(period - t_est) < 0.01 * t_est)) {
    throw ZdError(ErrorCode::kNotPeriodic, "period refinement drifted");
  }
  const Trajectory tr = SimulateZd(zd, x_anchor, period, period / n);
  if (tr.escaped) throw ZdError(ErrorCode::kEscapedDomain, "orbit leaves the domain");
  Orbit o;
  o.t = tr.s;
  o.x = tr.x;
  o.xdot = tr.xdot;
  o.tau = tr.tau;
  o.period = period;
  o.anchor_x = x_anchor;
  o.anchor_xdot = 0.0;
  o.closure_error = std::hypot(o.x.back() - o.x.front(), o.xdot.back() - o.xdot.front());
  const auto [xmin, xmax] = std::minmax_element(o.x.begin(), o.x.end());
  const auto [vmin, vmax] = std::minmax_element(o.xdot.begin(), o.xdot.end());
  o.delta1 = *xmax - *xmin;
  o.delta2 = *vmax - *vmin;
  if (!(o.delta1 > 0.0) || !(o.delta2 > 0.0)) {
    throw ZdError(ErrorCode::kDegenerateOrbit, "orbit has zero extent");
  }
  return o;
}

}  // namespace zdshape
