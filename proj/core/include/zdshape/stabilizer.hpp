#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "zdshape/dynamics.hpp"
#include "zdshape/zero_dynamics.hpp"

namespace zdshape {

/// Psi(a, b) = exp(-2 int_a^b b(z) dz) by adaptive Gauss-Kronrod quadrature.
double Psi(const ZdSystem& zd, double a, double b);

/// Integral of motion anchored at (anchor_x, anchor_xdot), evaluated with
/// nested adaptive quadrature.
double IntegralOfMotion(const ZdSystem& zd, double x, double xdot,
                        double anchor_x, double anchor_xdot);

/// Tabulated integral of motion. Stores Phi(x) = int_{x_a}^x b and
/// W(x) = int_{x_a}^x exp(2 Phi) c on a grid through the anchor, so that
/// I = x'^2 - exp(-2 Phi(x)) (x_a'^2 - 2 W(x)).
class MotionIntegral {
 public:
  MotionIntegral(std::shared_ptr<const ZdSystem> zd, double anchor_x,
                 double anchor_xdot, double step);

  double Value(double x, double xdot) const;
  double anchor_x() const { return anchor_x_; }
  double anchor_xdot() const { return anchor_xdot_; }

 private:
  std::shared_ptr<const ZdSystem> zd_;
  double anchor_x_, anchor_xdot_;
  HermiteTable table_;  // columns: Phi, W
};

/// Partials of the full x-acceleration F(x, x', y, y', v) under the
/// linearizing input.
struct GtildeTerms {
  double g_e = 0.0;     // dF/dy
  double g_edot = 0.0;  // dF/dy'
  double g_v = 0.0;     // dF/dv = g_x / g_y
  double f = 0.0;       // F itself at v = 0
};

GtildeTerms ComputeGtilde(const DesignParams& p, const MechanismInstance& m,
                          double y_bar, double x, double xdot, double e,
                          double edot);

/// Samples of a T-periodic linear system zeta' = A(t) zeta + B(t) v on a
/// uniform grid of N + 1 points.
struct PeriodicSystem {
  std::vector<Eigen::Matrix3d> a;
  std::vector<Eigen::Vector3d> b;
  double period = 0.0;

  int steps() const { return static_cast<int>(a.size()) - 1; }
  double step() const { return period / steps(); }
};

PeriodicSystem TransverseLinearization(const DesignParams& p,
                                       const MechanismInstance& m,
                                       double y_bar, const ZdSystem& zd,
                                       const Orbit& orbit);

struct GramianResult {
  Eigen::Matrix3d w;
  double min_eig = 0.0;
};

/// Controllability Gramian over one period; throws Uncontrollable when its
/// smallest eigenvalue is below 1e-12.
GramianResult ControllabilityGramian(const PeriodicSystem& sys);

struct RiccatiOptions {
  double tolerance = 1e-8;
  int max_periods = 200;
  double max_h_rate = 0.02;  // substep while step * stiffness exceeds this
};

/// Periodic solution of P' + A'P + PA + Q = P B R^{-1} B' P, stored at the
/// grid samples and interpolated by cubic Hermite segments whose slopes
/// come from the equation itself.
class PeriodicGain {
 public:
  Eigen::Matrix3d Evaluate(double t) const;
  /// Right-hand side P' at sample k.
  const std::vector<double>& t() const { return t_; }
  const std::vector<Eigen::Matrix3d>& p() const { return p_; }
  const std::vector<Eigen::Matrix3d>& pdot() const { return pdot_; }
  double period() const { return period_; }
  const Eigen::Matrix3d& q_c() const { return q_c_; }
  double r_c() const { return r_c_; }
  double periodicity_gap() const { return gap_; }
  int sweeps() const { return sweeps_; }

 private:
  friend PeriodicGain SolvePeriodicRiccati(const PeriodicSystem&,
                                           const Eigen::Matrix3d&, double,
                                           const RiccatiOptions&);
  std::vector<double> t_;
  std::vector<Eigen::Matrix3d> p_, pdot_;
  double period_ = 0.0;
  Eigen::Matrix3d q_c_;
  double r_c_ = 1.0;
  double gap_ = 0.0;
  int sweeps_ = 0;
};

PeriodicGain SolvePeriodicRiccati(const PeriodicSystem& sys,
                                  const Eigen::Matrix3d& q_c, double r_c,
                                  const RiccatiOptions& opts = {});

/// Riccati right-hand side -(A'P + PA + Q - P B R^{-1} B' P).
Eigen::Matrix3d RiccatiRate(const Eigen::Matrix3d& p, const Eigen::Matrix3d& a,
                            const Eigen::Vector3d& b, const Eigen::Matrix3d& q,
                            double r);

/// Feedback v and input u of the orbital stabilizer.
class OrbitalController {
 public:
  OrbitalController(const MechanismInstance& m, const DesignParams& p,
                    double y_bar, std::shared_ptr<const MotionIntegral> integral,
                    std::shared_ptr<const PeriodicGain> gain);

  struct Output {
    double u = 0.0;
    double v = 0.0;
    Eigen::Vector3d zeta = Eigen::Vector3d::Zero();
  };

  /// Uses precomputed PFL terms at the current state.
  Output Evaluate(const PflTerms& pfl, double x, double xdot, double y,
                  double ydot, double t) const;
  /// Computes the PFL terms itself.
  Output Evaluate(double x, double xdot, double y, double ydot, double t) const;

  const MechanismInstance& instance() const { return m_; }
  const DesignParams& params() const { return p_; }
  double y_bar() const { return y_bar_; }
  const PeriodicGain& gain() const { return *gain_; }
  const MotionIntegral& integral() const { return *integral_; }

 private:
  MechanismInstance m_;
  DesignParams p_;
  double y_bar_;
  std::shared_ptr<const MotionIntegral> integral_;
  std::shared_ptr<const PeriodicGain> gain_;
};

}  // namespace zdshape
