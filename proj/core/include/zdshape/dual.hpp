#pragma once

// Forward-mode dual numbers with a single tangent direction.
//
// Dual<T> carries a value and one directional derivative. Nesting
// (Dual<Dual<double>>) yields mixed second derivatives, which the dynamics
// code uses for Christoffel symbols and Jacobian time derivatives.

#include <cmath>
#include <ostream>
#include <type_traits>

#include <Eigen/Core>

namespace zdshape {

template <typename T>
class Dual {
 public:
  using value_type = T;

  constexpr Dual() = default;
  constexpr Dual(double v) : value_(v), deriv_(0.0) {}  // NOLINT
  template <typename U = T,
            typename = std::enable_if_t<!std::is_same_v<U, double>>>
  constexpr Dual(const T& v) : value_(v), deriv_(0.0) {}  // NOLINT
  constexpr Dual(const T& v, const T& d) : value_(v), deriv_(d) {}

  constexpr const T& value() const { return value_; }
  constexpr const T& deriv() const { return deriv_; }
  T& value() { return value_; }
  T& deriv() { return deriv_; }

  Dual& operator+=(const Dual& o) {
    value_ += o.value_;
    deriv_ += o.deriv_;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    value_ -= o.value_;
    deriv_ -= o.deriv_;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    deriv_ = deriv_ * o.value_ + value_ * o.deriv_;
    value_ *= o.value_;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const T inv = T(1.0) / o.value_;
    value_ *= inv;
    deriv_ = (deriv_ - value_ * o.deriv_) * inv;
    return *this;
  }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
  friend Dual operator/(Dual a, const Dual& b) { return a /= b; }
  friend Dual operator-(const Dual& a) { return Dual(-a.value_, -a.deriv_); }
  friend Dual operator+(const Dual& a) { return a; }

  friend bool operator<(const Dual& a, const Dual& b) { return a.value_ < b.value_; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.value_ > b.value_; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.value_ <= b.value_; }
  friend bool operator>=(const Dual& a, const Dual& b) { return a.value_ >= b.value_; }
  friend bool operator==(const Dual& a, const Dual& b) { return a.value_ == b.value_; }
  friend bool operator!=(const Dual& a, const Dual& b) { return a.value_ != b.value_; }

  friend std::ostream& operator<<(std::ostream& os, const Dual& a) {
    return os << "(" << a.value_ << " + " << a.deriv_ << "e)";
  }

 private:
  T value_{0.0};
  T deriv_{0.0};
};

template <typename T>
Dual<T> sin(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return Dual<T>(sin(a.value()), cos(a.value()) * a.deriv());
}
template <typename T>
Dual<T> cos(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return Dual<T>(cos(a.value()), -sin(a.value()) * a.deriv());
}
template <typename T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  const T e = exp(a.value());
  return Dual<T>(e, e * a.deriv());
}
template <typename T>
Dual<T> log(const Dual<T>& a) {
  using std::log;
  return Dual<T>(log(a.value()), a.deriv() / a.value());
}
template <typename T>
Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  const T s = sqrt(a.value());
  return Dual<T>(s, a.deriv() / (T(2.0) * s));
}
template <typename T>
Dual<T> atan2(const Dual<T>& y, const Dual<T>& x) {
  using std::atan2;
  const T r2 = x.value() * x.value() + y.value() * y.value();
  return Dual<T>(atan2(y.value(), x.value()),
                 (x.value() * y.deriv() - y.value() * x.deriv()) / r2);
}
template <typename T>
Dual<T> abs(const Dual<T>& a) {
  return a.value() < T(0.0) ? -a : a;
}
template <typename T>
Dual<T> abs2(const Dual<T>& a) {
  return a * a;
}
template <typename T>
bool isfinite(const Dual<T>& a) {
  using std::isfinite;
  return isfinite(a.value()) && isfinite(a.deriv());
}

// Real part, recursively stripped down to double.
inline double ValueOf(double v) { return v; }
template <typename T>
double ValueOf(const Dual<T>& v) {
  return ValueOf(v.value());
}

template <typename T>
struct is_dual : std::false_type {};
template <typename T>
struct is_dual<Dual<T>> : std::true_type {};

// Seeds a scalar input: value v with unit tangent if `active`.
template <typename T>
T Seed(double v, bool active) {
  if constexpr (is_dual<T>::value) {
    return T(typename T::value_type(v), typename T::value_type(active ? 1.0 : 0.0));
  } else {
    return T(v);
  }
}

}  // namespace zdshape

namespace Eigen {

template <typename T>
struct NumTraits<zdshape::Dual<T>> : GenericNumTraits<zdshape::Dual<T>> {
  using Real = zdshape::Dual<T>;
  using NonInteger = zdshape::Dual<T>;
  using Nested = zdshape::Dual<T>;
  using Literal = double;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2 * NumTraits<T>::ReadCost,
    AddCost = 2 * NumTraits<T>::AddCost,
    MulCost = 3 * NumTraits<T>::MulCost + NumTraits<T>::AddCost
  };
  static inline Real epsilon() { return Real(NumTraits<double>::epsilon()); }
  static inline Real dummy_precision() { return Real(1e-12); }
  static inline Real highest() { return Real(NumTraits<double>::highest()); }
  static inline Real lowest() { return Real(NumTraits<double>::lowest()); }
  static inline int digits10() { return NumTraits<double>::digits10(); }
};

template <typename T, typename BinaryOp>
struct ScalarBinaryOpTraits<zdshape::Dual<T>, double, BinaryOp> {
  using ReturnType = zdshape::Dual<T>;
};
template <typename T, typename BinaryOp>
struct ScalarBinaryOpTraits<double, zdshape::Dual<T>, BinaryOp> {
  using ReturnType = zdshape::Dual<T>;
};

}  // namespace Eigen
