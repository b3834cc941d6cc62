#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zdshape/dynamics.hpp"
#include "zdshape/mechanism.hpp"

namespace zdshape {

/// Scalar zero dynamics x'' = -b(x) x'^2 - c(x) on an interval of x.
class ZdSystem {
 public:
  virtual ~ZdSystem() = default;
  virtual void Coefficients(double x, double* b, double* c) const = 0;
  /// Input that keeps the output on its constraint, tau0 at (x, x').
  virtual double Feedforward(double x, double xdot) const {
    (void)x;
    (void)xdot;
    return 0.0;
  }
  virtual double XMin() const = 0;
  virtual double XMax() const = 0;

  double B(double x) const {
    double b, c;
    Coefficients(x, &b, &c);
    return b;
  }
  double C(double x) const {
    double b, c;
    Coefficients(x, &b, &c);
    return c;
  }
  bool Contains(double x) const { return x >= XMin() && x <= XMax(); }
};

/// Zero dynamics given by plain functions, mainly for analytic checks.
class FunctionZd : public ZdSystem {
 public:
  FunctionZd(std::function<double(double)> b, std::function<double(double)> c,
             double x_min, double x_max)
      : b_(std::move(b)), c_(std::move(c)), x_min_(x_min), x_max_(x_max) {}

  void Coefficients(double x, double* b, double* c) const override {
    *b = b_(x);
    *c = c_(x);
  }
  double XMin() const override { return x_min_; }
  double XMax() const override { return x_max_; }

 private:
  std::function<double(double)> b_, c_;
  double x_min_, x_max_;
};

/// Uniform-grid piecewise cubic Hermite interpolation of a vector-valued
/// function from node values and node derivatives.
class HermiteTable {
 public:
  HermiteTable() = default;
  HermiteTable(double x0, double h, int cols, std::vector<double> values,
               std::vector<double> slopes);

  int nodes() const { return nodes_; }
  int cols() const { return cols_; }
  double x_min() const { return x0_; }
  double x_max() const { return x0_ + h_ * (nodes_ - 1); }
  double step() const { return h_; }

  /// Writes all columns at x into out[0..cols). x is clamped to the range.
  void Evaluate(double x, double* out) const;
  /// Column derivatives at x.
  void EvaluateSlope(double x, double* out) const;

 private:
  double x0_ = 0.0, h_ = 1.0;
  int nodes_ = 0, cols_ = 0;
  std::vector<double> values_, slopes_;
};

/// Design-independent tabulation of the minimal-form terms along y = y_bar.
/// Columns hold M_chi and the velocity-quadratic term for three inertia
/// groups (links 1-2, link 3, link 4 at reference depth), the spring forces
/// per unit stiffness and the input vector. Any design p is then a linear
/// combination of columns.
class ZdTable {
 public:
  static constexpr int kCols = 21;

  static std::shared_ptr<const ZdTable> Build(const MechanismInstance& m,
                                              double y_bar, double x_lo,
                                              double x_hi, int nodes);

  struct Terms {
    Eigen::Matrix2d m_chi;
    Eigen::Vector2d quad;  // C_chi(chi, (1, 0)) (1, 0)
    Eigen::Vector2d g_chi;
    Eigen::Vector2d b_chi;
  };

  Terms Evaluate(const DesignParams& p, double x) const;
  /// Raw tabulated columns, for inspection.
  void Columns(double x, double* out) const { table_.Evaluate(x, out); }

  double y_bar() const { return y_bar_; }
  double x_min() const { return table_.x_min(); }
  double x_max() const { return table_.x_max(); }
  const MechanismInstance& instance() const { return instance_; }
  const LinkTable& links() const { return instance_.links; }

 private:
  MechanismInstance instance_;
  double y_bar_ = 0.0;
  HermiteTable table_;
};

/// Zero dynamics of the mechanism for a fixed design, from a ZdTable.
class MechanismZd : public ZdSystem {
 public:
  MechanismZd(std::shared_ptr<const ZdTable> table, const DesignParams& p);

  void Coefficients(double x, double* b, double* c) const override;
  double Feedforward(double x, double xdot) const override;
  double XMin() const override { return table_->x_min(); }
  double XMax() const override { return table_->x_max(); }

  const DesignParams& params() const { return p_; }
  const ZdTable& table() const { return *table_; }

 private:
  std::shared_ptr<const ZdTable> table_;
  DesignParams p_;
  double s3_, s4_;
};

struct ZdCoefficientsResult {
  double b = 0.0;
  double c = 0.0;
  double structure_residual = 0.0;
};

/// b and c from three velocity probes of the linearized x-acceleration,
/// evaluated directly on the mechanism (no tabulation).
ZdCoefficientsResult ZdCoefficients(const DesignParams& p,
                                    const MechanismInstance& m, double y_bar,
                                    double x);

/// tau0 on the manifold y = y_bar, y' = 0, evaluated directly.
double FeedforwardDirect(const DesignParams& p, const MechanismInstance& m,
                         double y_bar, double x, double xdot);

/// Direct-evaluation zero dynamics; slow, used for cross-checks.
class DirectZd : public ZdSystem {
 public:
  DirectZd(const MechanismInstance& m, const DesignParams& p, double y_bar,
           double x_min, double x_max)
      : m_(m), p_(p), y_bar_(y_bar), x_min_(x_min), x_max_(x_max) {}

  void Coefficients(double x, double* b, double* c) const override;
  double Feedforward(double x, double xdot) const override;
  double XMin() const override { return x_min_; }
  double XMax() const override { return x_max_; }

 private:
  MechanismInstance m_;
  DesignParams p_;
  double y_bar_, x_min_, x_max_;
};

struct EquilibriumResult {
  double x0 = 0.0;
  std::vector<double> roots;
};

/// Root of c nearest to x_center, by a sign-change scan plus bisection.
EquilibriumResult FindEquilibrium(const ZdSystem& zd, double lo, double hi,
                                  double x_center, int subdivisions = 200);

/// Omega = c'(x0) by Richardson-extrapolated central differences.
double Omega(const ZdSystem& zd, double x0, double span);

struct Trajectory {
  std::vector<double> s, x, xdot, tau;
  double step = 0.0;
  std::string method = "rk4";
  bool escaped = false;

  std::size_t size() const { return s.size(); }
};

/// Fixed-step RK4 integration of the zero dynamics from (x_init, xdot_init).
/// Stops early with escaped = true when x leaves the domain.
Trajectory SimulateZd(const ZdSystem& zd, double x_init, double duration,
                      double step, double xdot_init = 0.0);

/// Time of the second crossing of x' = 0 after the start; the crossing must
/// lie on the same side of x0 as the initial point.
double DetectPeriod(const Trajectory& traj, double x0);

struct Orbit {
  std::vector<double> t, x, xdot, tau;
  double period = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double anchor_x = 0.0;
  double anchor_xdot = 0.0;
  double closure_error = 0.0;

  std::size_t size() const { return t.size(); }
  double step() const { return period / static_cast<double>(t.size() - 1); }
};

/// Closed orbit through (x_anchor, 0): detects the period, sharpens it so the
/// discrete flow closes, then samples one period with an even number of
/// steps close to `step`.
Orbit BuildOrbit(const ZdSystem& zd, double x_anchor, double x0, double step,
                 double max_duration);

}  // namespace zdshape
