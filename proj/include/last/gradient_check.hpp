#ifndef LAST_GRADIENT_CHECK_HPP_
#define LAST_GRADIENT_CHECK_HPP_

#include <cmath>
#include <stdexcept>

#include "last/types.hpp"

namespace last {

struct GradientCheckReport {
  double max_relative_error = 0.0;
  Eigen::Index worst_index = -1;
  bool pass = true;
};

//! Central-difference verification of an analytic gradient.
//!
//! Per coordinate: fd = (f(x + h e_i) - f(x - h e_i)) / 2h, compared as
//! |fd - g_i| / max(1, |fd|, |g_i|) against the tolerance.
template <typename F, typename G>
GradientCheckReport check_gradient(F&& f, G&& grad, const Vector& point, double step,
                                   double tolerance) {
  if (!(step > 0)) throw std::invalid_argument("check_gradient: step must be positive");
  if (!(tolerance > 0)) throw std::invalid_argument("check_gradient: tolerance must be positive");
  Vector g = grad(point);
  if (g.size() != point.size()) {
    throw std::invalid_argument("check_gradient: gradient size does not match point");
  }
  GradientCheckReport report;
  Vector x = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    double saved = x[i];
    x[i] = saved + step;
    double fp = f(x);
    x[i] = saved - step;
    double fm = f(x);
    x[i] = saved;
    double fd = (fp - fm) / (2.0 * step);
    double err = std::abs(fd - g[i]) / std::max({1.0, std::abs(fd), std::abs(g[i])});
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_index = i;
    }
  }
  report.pass = report.max_relative_error <= tolerance;
  return report;
}

//! Row-major flattening of (U, v) into one parameter vector.
inline Vector flatten_params(const Matrix& U, const Vector& v) {
  Vector theta(U.size() + v.size());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < U.rows(); ++r) {
    for (Eigen::Index c = 0; c < U.cols(); ++c) theta[k++] = U(r, c);
  }
  theta.tail(v.size()) = v;
  return theta;
}

inline void unflatten_params(const Vector& theta, Matrix& U, Vector& v) {
  if (theta.size() != U.size() + v.size()) {
    throw std::invalid_argument("unflatten_params: size mismatch");
  }
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < U.rows(); ++r) {
    for (Eigen::Index c = 0; c < U.cols(); ++c) U(r, c) = theta[k++];
  }
  v = theta.tail(v.size());
}

}  // namespace last

#endif  // LAST_GRADIENT_CHECK_HPP_
