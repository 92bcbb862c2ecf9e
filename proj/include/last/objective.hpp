#ifndef LAST_OBJECTIVE_HPP_
#define LAST_OBJECTIVE_HPP_

#include <cmath>
#include <stdexcept>

#include "last/model.hpp"
#include "last/types.hpp"

namespace last {

struct ObjectiveConfig {
  double nu = 1.0;       // weight-decay strength
  double beta = 100.0;   // soft-plus sharpness
  double epsilon = 1e-4; // feasibility floor for thresholds

  void validate() const {
    if (!(nu > 0)) throw std::invalid_argument("objective config: nu must be positive");
    if (!(beta > 0)) throw std::invalid_argument("objective config: beta must be positive");
    if (!(epsilon > 0)) throw std::invalid_argument("objective config: epsilon must be positive");
  }
};

//! Gradient of the concave-side component at the current iterate; the
//! linearized subproblem minimizes g(U, v) - <U, A> - v'b over v >= epsilon.
struct LinearizationPoint {
  Matrix A;  // n x N
  Vector b;  // N
};

inline double hinge(double x) { return std::max(0.0, 1.0 - x); }

//! Hinge loss of the exact two-step classifier plus weight decay:
//! sum_i max(0, 1 - y_i w'max(0, D'x_i - alpha)) + (nu/2) |w|^2.
inline double objective_original(const DictionaryModel& model, const LabeledDataset& data,
                                 double nu) {
  model.validate();
  data.validate();
  if (!(nu > 0)) throw std::invalid_argument("objective_original: nu must be positive");
  if (data.dim() != model.dim()) {
    throw std::invalid_argument("objective_original: dimension mismatch");
  }
  Matrix features = ((model.D.transpose() * data.features).array() - model.alpha)
                        .cwiseMax(0.0)
                        .matrix();  // N x m
  Vector scores = features.transpose() * model.w;
  double loss = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    loss += hinge(data.labels[i] * scores[i]);
  }
  return loss + 0.5 * nu * model.w.squaredNorm();
}

namespace detail {

// Per-sample soft-plus activation sums split by atom sign:
// plus_i = sum_{j: s_j=+1} q(u_j'x_i - v_j), minus_i likewise for s_j=-1.
inline void sign_split_sums(const ModelParams& params, const Matrix& X, double beta,
                            Vector& plus, Vector& minus) {
  Matrix Z = params.U.transpose() * X;  // N x m
  Z.colwise() -= params.v;
  Matrix Q = Z.unaryExpr([beta](double x) { return softplus_value(x, beta); });
  Vector plus_ind(params.s.size()), minus_ind(params.s.size());
  for (Eigen::Index j = 0; j < params.s.size(); ++j) {
    plus_ind[j] = params.s[j] > 0 ? 1.0 : 0.0;
    minus_ind[j] = params.s[j] > 0 ? 0.0 : 1.0;
  }
  plus = Q.transpose() * plus_ind;
  minus = Q.transpose() * minus_ind;
}

inline void check_objective_inputs(const ModelParams& params, const LabeledDataset& data,
                                   const ObjectiveConfig& cfg, const char* where) {
  cfg.validate();
  data.validate();
  params.validate(cfg.epsilon);
  if (params.dim() != data.dim()) {
    throw std::invalid_argument(std::string(where) + ": dimension mismatch");
  }
}

}  // namespace detail

//! Smoothed sign-constrained objective:
//! sum_i max(0, 1 - y_i sum_j s_j q(u_j'x_i - v_j)) + (nu/2) |v|^2.
inline double objective_relaxed(const ModelParams& params, const LabeledDataset& data,
                                const ObjectiveConfig& cfg) {
  detail::check_objective_inputs(params, data, cfg, "objective_relaxed");
  Vector plus, minus;
  detail::sign_split_sums(params, data.features, cfg.beta, plus, minus);
  double loss = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    double margin = data.labels[i] * (plus[i] - minus[i]);
    loss += hinge(margin);
  }
  return loss + 0.5 * cfg.nu * params.v.squaredNorm();
}

struct DcComponents {
  double g;  // convex part
  double h;  // concave-side part; the objective equals g - h
};

//! Difference-of-convex split of the relaxed objective. With
//! same_i = sum over atoms matching y_i and diff_i over the others,
//! g = (nu/2)|v|^2 + sum_i max(same_i, 1 + diff_i) and h = sum_i same_i.
inline DcComponents dc_components(const ModelParams& params, const LabeledDataset& data,
                                  const ObjectiveConfig& cfg) {
  detail::check_objective_inputs(params, data, cfg, "dc_components");
  Vector plus, minus;
  detail::sign_split_sums(params, data.features, cfg.beta, plus, minus);
  DcComponents out{0.5 * cfg.nu * params.v.squaredNorm(), 0.0};
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    double same = data.labels[i] > 0 ? plus[i] : minus[i];
    double diff = data.labels[i] > 0 ? minus[i] : plus[i];
    out.g += std::max(same, 1.0 + diff);
    out.h += same;
  }
  return out;
}

//! Exact gradient of the concave-side component h:
//! column j of A is sum_{i: y_i=s_j} q'(u_j'x_i - v_j) x_i and
//! b_j = -sum_{i: y_i=s_j} q'(u_j'x_i - v_j).
inline LinearizationPoint grad_h(const ModelParams& params, const LabeledDataset& data,
                                 const ObjectiveConfig& cfg) {
  detail::check_objective_inputs(params, data, cfg, "grad_h");
  const double beta = cfg.beta;
  Matrix Z = params.U.transpose() * data.features;  // N x m
  Z.colwise() -= params.v;
  Matrix W = Z.unaryExpr([beta](double x) { return detail::softplus_derivative(x, beta); });
  // Keep only entries whose atom sign matches the sample label.
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < params.s.size(); ++j) {
      if (params.s[j] != data.labels[i]) W(j, i) = 0.0;
    }
  }
  LinearizationPoint lin;
  lin.A = data.features * W.transpose();
  lin.b = -W.rowwise().sum();
  return lin;
}

//! Objective of the convex linearized subproblem, g(U, v) - <U, A> - v'b.
inline double linearized_objective(const ModelParams& params, const LinearizationPoint& lin,
                                   const LabeledDataset& data, const ObjectiveConfig& cfg) {
  DcComponents dc = dc_components(params, data, cfg);
  return dc.g - params.U.cwiseProduct(lin.A).sum() - params.v.dot(lin.b);
}

struct PerSampleValue {
  double value;
  Matrix grad_U;  // n x N subgradient
  Vector grad_v;  // N subgradient
};

//! One sample's share of the linearized subproblem:
//! p = max(same, 1 + diff) + (1/m)((nu/2)|v|^2 - <U, A> - v'b),
//! with the subgradient taking the second max branch on ties.
inline PerSampleValue p_eval(const ModelParams& params, const Eigen::Ref<const Vector>& x,
                             int y, const LinearizationPoint& lin, Eigen::Index m,
                             const ObjectiveConfig& cfg) {
  cfg.validate();
  params.validate(cfg.epsilon);
  if (y != 1 && y != -1) throw std::invalid_argument("p_eval: label must be -1 or +1");
  if (m < 1) throw std::invalid_argument("p_eval: sample count must be positive");
  if (x.size() != params.dim()) throw std::invalid_argument("p_eval: dimension mismatch");
  if (lin.A.rows() != params.U.rows() || lin.A.cols() != params.U.cols() ||
      lin.b.size() != params.v.size()) {
    throw std::invalid_argument("p_eval: linearization point does not match parameters");
  }

  const Eigen::Index N = params.atoms();
  Vector z = params.U.transpose() * x - params.v;
  double same = 0, diff = 0;
  for (Eigen::Index j = 0; j < N; ++j) {
    double q = detail::softplus_value(z[j], cfg.beta);
    (params.s[j] == y ? same : diff) += q;
  }
  bool same_branch = same > 1.0 + diff;

  PerSampleValue out;
  double inv_m = 1.0 / static_cast<double>(m);
  out.value = std::max(same, 1.0 + diff) +
              inv_m * (0.5 * cfg.nu * params.v.squaredNorm() -
                       params.U.cwiseProduct(lin.A).sum() - params.v.dot(lin.b));
  out.grad_U = -inv_m * lin.A;
  out.grad_v = inv_m * (cfg.nu * params.v - lin.b);
  int active_sign = same_branch ? y : -y;
  for (Eigen::Index j = 0; j < N; ++j) {
    if (params.s[j] != active_sign) continue;
    double qd = detail::softplus_derivative(z[j], cfg.beta);
    out.grad_U.col(j) += qd * x;
    out.grad_v[j] -= qd;
  }
  return out;
}

}  // namespace last

#endif  // LAST_OBJECTIVE_HPP_
