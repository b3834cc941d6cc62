#include "zdshape/stabilizer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace zdshape {

namespace {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

constexpr double kQuadTol = 1e-10;

void RequireInside(const ZdSystem& zd, double a, double b) {
  if (!zd.Contains(a) || !zd.Contains(b)) {
    std::ostringstream os;
    os << "quadrature interval [" << std::min(a, b) << ", " << std::max(a, b)
       << "] leaves the zero-dynamics domain";
    throw ZdError(ErrorCode::kEscapedDomain, os.str());
  }
}

double IntegrateB(const ZdSystem& zd, double a, double b) {
  if (a == b) return 0.0;
  return gauss_kronrod<double, 15>::integrate(
      [&](double z) { return zd.B(z); }, a, b, 15, kQuadTol);
}

}  // namespace

double Psi(const ZdSystem& zd, double a, double b) {
  RequireInside(zd, a, b);
  return std::exp(-2.0 * IntegrateB(zd, a, b));
}

double IntegralOfMotion(const ZdSystem& zd, double x, double xdot,
                        double anchor_x, double anchor_xdot) {
  RequireInside(zd, anchor_x, x);
  double w = 0.0;
  if (x != anchor_x) {
    w = gauss_kronrod<double, 15>::integrate(
        [&](double z) { return Psi(zd, z, anchor_x) * zd.C(z); }, anchor_x, x,
        15, kQuadTol);
  }
  return xdot * xdot -
         Psi(zd, anchor_x, x) * (anchor_xdot * anchor_xdot - 2.0 * w);
}

MotionIntegral::MotionIntegral(std::shared_ptr<const ZdSystem> zd,
                               double anchor_x, double anchor_xdot, double step)
    : zd_(std::move(zd)), anchor_x_(anchor_x), anchor_xdot_(anchor_xdot) {
  const ZdSystem& s = *zd_;
  RequireInside(s, anchor_x, anchor_x);
  const int n_left = static_cast<int>(std::floor((anchor_x - s.XMin()) / step));
  const int n_right = static_cast<int>(std::floor((s.XMax() - anchor_x) / step));
  const int n = n_left + n_right + 1;
  if (n < 2) throw ZdError(ErrorCode::kConfig, "motion-integral grid too coarse");
  const double x0 = anchor_x - n_left * step;
  std::vector<double> phi(n), w(n);
  phi[n_left] = 0.0;
  w[n_left] = 0.0;
  auto segment = [&](double a, double b, double phi_a, double* dphi, double* dw) {
    // Integrals over [a, b] with a < b, Phi(a) = phi_a.
    *dphi = gauss<double, 10>::integrate([&](double z) { return s.B(z); }, a, b);
    *dw = gauss<double, 10>::integrate(
        [&](double z) {
          const double pz =
              phi_a + gauss<double, 10>::integrate([&](double u) { return s.B(u); }, a, z);
          return std::exp(2.0 * pz) * s.C(z);
        },
        a, b);
  };
  for (int i = n_left; i + 1 < n; ++i) {
    double dphi, dw;
    segment(x0 + i * step, x0 + (i + 1) * step, phi[i], &dphi, &dw);
    phi[i + 1] = phi[i] + dphi;
    w[i + 1] = w[i] + dw;
  }
  for (int i = n_left; i > 0; --i) {
    // Leftward: Phi at the left end first, then W over the segment.
    const double a = x0 + (i - 1) * step, b = x0 + i * step;
    const double dphi =
        gauss<double, 10>::integrate([&](double z) { return s.B(z); }, a, b);
    phi[i - 1] = phi[i] - dphi;
    double unused, dw;
    segment(a, b, phi[i - 1], &unused, &dw);
    w[i - 1] = w[i] - dw;
  }
  std::vector<double> values(2 * n), slopes(2 * n);
  for (int i = 0; i < n; ++i) {
    double b, c;
    s.Coefficients(x0 + i * step, &b, &c);
    values[2 * i] = phi[i];
    values[2 * i + 1] = w[i];
    slopes[2 * i] = b;
    slopes[2 * i + 1] = std::exp(2.0 * phi[i]) * c;
  }
  table_ = HermiteTable(x0, step, 2, std::move(values), std::move(slopes));
}

double MotionIntegral::Value(double x, double xdot) const {
  if (x < table_.x_min() || x > table_.x_max()) {
    throw ZdError(ErrorCode::kEscapedDomain, "x outside the motion-integral table");
  }
  double pw[2];
  table_.Evaluate(x, pw);
  return xdot * xdot -
         std::exp(-2.0 * pw[0]) * (anchor_xdot_ * anchor_xdot_ - 2.0 * pw[1]);
}

GtildeTerms ComputeGtilde(const DesignParams& p, const MechanismInstance& m,
                          double y_bar, double x, double xdot, double e,
                          double edot) {
  using D = Dual<double>;
  const DynamicParams dp = DynamicParams::FromDesign(m, p);
  GtildeTerms out;
  for (int pass = 0; pass < 2; ++pass) {
    const Vec2<D> chi(D(x), D(y_bar + e, pass == 0 ? 1.0 : 0.0));
    const Vec2<D> chidot(D(xdot), D(edot, pass == 1 ? 1.0 : 0.0));
    const MinimalFormT<D> mf = ComputeMinimalForm<D>(m, dp, chi, chidot);
    const PflTermsT<D> t = ComputePflTerms<D>(mf, chidot, m.tol.input_singularity);
    const D f = t.f_x + t.g_x * t.tau0;
    if (pass == 0) {
      out.g_e = f.deriv();
      out.g_v = (t.g_x / t.g_y).value();
      out.f = f.value();
    } else {
      out.g_edot = f.deriv();
    }
  }
  return out;
}

PeriodicSystem TransverseLinearization(const DesignParams& p,
                                       const MechanismInstance& m,
                                       double y_bar, const ZdSystem& zd,
                                       const Orbit& orbit) {
  const int n = static_cast<int>(orbit.size()) - 1;
  if (n < 2 || n % 2 != 0) {
    throw ZdError(ErrorCode::kConfig, "orbit needs an even number of steps");
  }
  PeriodicSystem sys;
  sys.period = orbit.period;
  sys.a.resize(n + 1);
  sys.b.resize(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double x = orbit.x[k], xd = orbit.xdot[k];
    const GtildeTerms g = ComputeGtilde(p, m, y_bar, x, xd, 0.0, 0.0);
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    a(0, 0) = -2.0 * xd * zd.B(x);
    a(0, 1) = 2.0 * xd * g.g_e;
    a(0, 2) = 2.0 * xd * g.g_edot;
    a(1, 2) = 1.0;
    sys.a[k] = a;
    sys.b[k] = Eigen::Vector3d(2.0 * xd * g.g_v, 0.0, 1.0);
  }
  return sys;
}

GramianResult ControllabilityGramian(const PeriodicSystem& sys) {
  const int n = sys.steps();
  const double h2 = 2.0 * sys.step();
  auto rate = [&](const Eigen::Matrix3d& w, int k) -> Eigen::Matrix3d {
    return sys.a[k] * w + w * sys.a[k].transpose() + sys.b[k] * sys.b[k].transpose();
  };
  Eigen::Matrix3d w = Eigen::Matrix3d::Zero();
  for (int k = 0; k + 2 <= n; k += 2) {
    const Eigen::Matrix3d k1 = rate(w, k);
    const Eigen::Matrix3d k2 = rate(w + 0.5 * h2 * k1, k + 1);
    const Eigen::Matrix3d k3 = rate(w + 0.5 * h2 * k2, k + 1);
    const Eigen::Matrix3d k4 = rate(w + h2 * k3, k + 2);
    w += h2 / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    w = 0.5 * (w + w.transpose()).eval();
  }
  GramianResult out;
  out.w = w;
  out.min_eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(w).eigenvalues().minCoeff();
  if (!(out.min_eig >= 1e-12)) {
    std::ostringstream os;
    os << "controllability Gramian is singular (min eigenvalue " << out.min_eig << ")";
    throw ZdError(ErrorCode::kUncontrollable, os.str());
  }
  return out;
}

Eigen::Matrix3d RiccatiRate(const Eigen::Matrix3d& p, const Eigen::Matrix3d& a,
                            const Eigen::Vector3d& b, const Eigen::Matrix3d& q,
                            double r) {
  const Eigen::Vector3d pb = p * b;
  return -(a.transpose() * p + p * a + q - pb * pb.transpose() / r);
}

PeriodicGain SolvePeriodicRiccati(const PeriodicSystem& sys,
                                  const Eigen::Matrix3d& q_c, double r_c,
                                  const RiccatiOptions& opts) {
  const int n = sys.steps();
  if (n < 4) {
    throw ZdError(ErrorCode::kConfig, "periodic system needs at least four steps");
  }
  const double h = sys.step();
  // Sample index modulo the period; sample n duplicates sample 0.
  auto wrap = [n](int k) { return ((k % n) + n) % n; };
  // Coefficients between samples k (s = 0) and k - 1 (s = 1) by cubic
  // interpolation through k + 1, k, k - 1, k - 2.
  auto back_at = [&](const Eigen::Matrix3d& p, int k, double s) -> Eigen::Matrix3d {
    const double w0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
    const double w1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
    const double w2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
    const double w3 = (s + 1.0) * s * (s - 1.0) / 6.0;
    const int i0 = wrap(k + 1), i1 = wrap(k), i2 = wrap(k - 1), i3 = wrap(k - 2);
    const Eigen::Matrix3d a =
        w0 * sys.a[i0] + w1 * sys.a[i1] + w2 * sys.a[i2] + w3 * sys.a[i3];
    const Eigen::Vector3d b =
        w0 * sys.b[i0] + w1 * sys.b[i1] + w2 * sys.b[i2] + w3 * sys.b[i3];
    return -RiccatiRate(p, a, b, q_c, r_c);
  };
  std::vector<Eigen::Matrix3d> samples(n + 1);
  Eigen::Matrix3d p_end = q_c;
  PeriodicGain gain;
  gain.period_ = sys.period;
  gain.q_c_ = q_c;
  gain.r_c_ = r_c;
  for (int sweep = 1; sweep <= opts.max_periods; ++sweep) {
    Eigen::Matrix3d p = p_end;
    samples[n] = p;
    for (int k = n; k > 0; --k) {
      // Stiffness of the quadratic term sets the number of substeps.
      const double rate = 2.0 * (p * sys.b[k]).norm() * sys.b[k].norm() / r_c +
                          2.0 * sys.a[k].norm();
      const int sub = std::max(1, static_cast<int>(std::ceil(h * rate / opts.max_h_rate)));
      const double hs = h / sub, ds = 1.0 / sub;
      for (int i = 0; i < sub; ++i) {
        const double s0 = i * ds;
        const Eigen::Matrix3d k1 = back_at(p, k, s0);
        const Eigen::Matrix3d k2 = back_at(p + 0.5 * hs * k1, k, s0 + 0.5 * ds);
        const Eigen::Matrix3d k3 = back_at(p + 0.5 * hs * k2, k, s0 + 0.5 * ds);
        const Eigen::Matrix3d k4 = back_at(p + hs * k3, k, s0 + ds);
        p += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      p = 0.5 * (p + p.transpose()).eval();
      samples[k - 1] = p;
    }
    if (!p.allFinite()) break;
    const double gap = (p - p_end).norm();
    gain.sweeps_ = sweep;
    if (gap < opts.tolerance) {
      gain.gap_ = gap;
      gain.p_ = samples;
      gain.t_.resize(n + 1);
      gain.pdot_.resize(n + 1);
      for (int k = 0; k <= n; ++k) {
        gain.t_[k] = k * h;
        gain.pdot_[k] = RiccatiRate(samples[k], sys.a[k], sys.b[k], q_c, r_c);
      }
      return gain;
    }
    p_end = p;
  }
  throw ZdError(ErrorCode::kRiccatiDiverged,
                "periodic Riccati sweep did not converge");
}

Eigen::Matrix3d PeriodicGain::Evaluate(double t) const {
  double tau = std::fmod(t, period_);
  if (tau < 0) tau += period_;
  const int m = static_cast<int>(p_.size()) - 1;
  const double h = period_ / m;
  int j = static_cast<int>(std::floor(tau / h));
  j = std::clamp(j, 0, m - 1);
  const double s = std::clamp((tau - j * h) / h, 0.0, 1.0);
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * p_[j] + (s3 - 2 * s2 + s) * h * pdot_[j] +
         (-2 * s3 + 3 * s2) * p_[j + 1] + (s3 - s2) * h * pdot_[j + 1];
}

OrbitalController::OrbitalController(const MechanismInstance& m,
                                     const DesignParams& p, double y_bar,
                                     std::shared_ptr<const MotionIntegral> integral,
                                     std::shared_ptr<const PeriodicGain> gain)
    : m_(m),
      p_(p),
      y_bar_(y_bar),
      integral_(std::move(integral)),
      gain_(std::move(gain)) {}

OrbitalController::Output OrbitalController::Evaluate(const PflTerms& pfl,
                                                      double x, double xdot,
                                                      double y, double ydot,
                                                      double t) const {
  Output out;
  out.zeta = Eigen::Vector3d(integral_->Value(x, xdot), y - y_bar_, ydot);
  const double g_v = pfl.g_x / pfl.g_y;
  const Eigen::RowVector3d row(2.0 * xdot * g_v, 0.0, 1.0);
  out.v = -(row * gain_->Evaluate(t) * out.zeta)(0) / gain_->r_c();
  out.u = pfl.tau0 + pfl.tau_v * out.v;
  return out;
}

OrbitalController::Output OrbitalController::Evaluate(double x, double xdot,
                                                      double y, double ydot,
                                                      double t) const {
  const PflTerms pfl = ComputePflTerms(p_, m_, Eigen::Vector2d(x, y),
                                       Eigen::Vector2d(xdot, ydot));
  return Evaluate(pfl, x, xdot, y, ydot, t);
}

}  // namespace zdshape
