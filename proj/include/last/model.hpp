#ifndef LAST_MODEL_HPP_
#define LAST_MODEL_HPP_

#include <cmath>
#include <stdexcept>

#include "last/types.hpp"

namespace last {

//! One-sided soft-thresholding map, componentwise max(0, z_i - alpha).
inline Vector soft_threshold(const Eigen::Ref<const Vector>& z, double alpha) {
  if (!(alpha >= 0)) throw std::invalid_argument("soft_threshold: alpha must be non-negative");
  if (!z.allFinite()) throw std::invalid_argument("soft_threshold: non-finite input");
  return (z.array() - alpha).cwiseMax(0.0).matrix();
}

struct SoftPlusValue {
  double value;
  double derivative;
};

//! Smooth approximation of max(0, x): q(x) = log(1 + exp(beta*x)) / beta.
//!
//! Evaluated as max(x, 0) + log1p(exp(-beta*|x|)) / beta, which never
//! overflows; 0 <= q(x) - max(0, x) <= log(2)/beta everywhere.
inline SoftPlusValue soft_plus(double x, double beta) {
  if (!(beta > 0)) throw std::invalid_argument("soft_plus: beta must be positive");
  SoftPlusValue r;
  r.value = std::max(x, 0.0) + std::log1p(std::exp(-beta * std::abs(x))) / beta;
  if (x >= 0) {
    r.derivative = 1.0 / (1.0 + std::exp(-beta * x));
  } else {
    double e = std::exp(beta * x);
    r.derivative = e / (1.0 + e);
  }
  return r;
}

namespace detail {

// Unchecked softplus pieces for vectorized inner loops.
inline double softplus_value(double x, double beta) {
  return std::max(x, 0.0) + std::log1p(std::exp(-beta * std::abs(x))) / beta;
}

inline double softplus_derivative(double x, double beta) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-beta * x));
  double e = std::exp(beta * x);
  return e / (1.0 + e);
}

}  // namespace detail

//! Raw score sum_j s_j * max(0, u_j'x - v_j).
inline double predict_score(const ModelParams& params, const Eigen::Ref<const Vector>& x) {
  if (x.size() != params.U.rows()) {
    throw std::invalid_argument("predict_score: input dimension does not match model");
  }
  Vector active = ((params.U.transpose() * x - params.v).array()).cwiseMax(0.0).matrix();
  return params.s.cast<double>().dot(active);
}

//! Raw score w' * max(0, D'x - alpha).
inline double predict_score(const DictionaryModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.D.rows()) {
    throw std::invalid_argument("predict_score: input dimension does not match model");
  }
  Vector features = ((model.D.transpose() * x).array() - model.alpha).cwiseMax(0.0).matrix();
  return model.w.dot(features);
}

//! Scores for a whole sample matrix (columns are samples).
inline Vector predict_scores(const DictionaryModel& model, const Eigen::Ref<const Matrix>& X) {
  if (X.rows() != model.D.rows()) {
    throw std::invalid_argument("predict_scores: input dimension does not match model");
  }
  Matrix features = ((model.D.transpose() * X).array() - model.alpha).cwiseMax(0.0).matrix();
  return features.transpose() * model.w;
}

inline int predict_label(double score) { return score > 0 ? 1 : -1; }

inline int predict_label(const ModelParams& params, const Eigen::Ref<const Vector>& x) {
  return predict_label(predict_score(params, x));
}

inline int predict_label(const DictionaryModel& model, const Eigen::Ref<const Vector>& x) {
  return predict_label(predict_score(model, x));
}

//! One-vs-all decision: class of the member with maximal raw score.
//! Ties go to the lowest class id.
inline int predict_multiclass(const MulticlassModel& model, const Eigen::Ref<const Vector>& x) {
  if (model.models.empty()) throw std::invalid_argument("predict_multiclass: empty model");
  double best_score = 0.0;
  int best_label = 0;
  bool first = true;
  for (std::size_t c = 0; c < model.models.size(); ++c) {
    double score = predict_score(model.models[c], x);
    int label = model.labels[c];
    if (first || score > best_score || (score == best_score && label < best_label)) {
      best_score = score;
      best_label = label;
      first = false;
    }
  }
  return best_label;
}

//! Change of variables u_j = |w_j| d_j, v_j = |w_j|, s_j = sgn(w_j),
//! inverted: d_j = u_j / v_j, w_j = s_j v_j, alpha = 1.
inline DictionaryModel to_dictionary_form(const ModelParams& params) {
  if (params.v.size() != params.U.cols() || params.s.size() != params.U.cols()) {
    throw std::invalid_argument("to_dictionary_form: inconsistent parameter sizes");
  }
  if ((params.v.array() <= 0).any()) {
    throw std::logic_error("to_dictionary_form: thresholds must be strictly positive");
  }
  DictionaryModel model;
  model.D = params.U * params.v.cwiseInverse().asDiagonal();
  model.w = params.s.cast<double>().cwiseProduct(params.v);
  model.alpha = 1.0;
  return model;
}

//! Forward change of variables; requires alpha = 1 and all w_j nonzero.
inline ModelParams from_dictionary_form(const DictionaryModel& model) {
  if (model.alpha != 1.0) {
    throw std::invalid_argument("from_dictionary_form: model threshold must be 1");
  }
  if (model.w.size() != model.D.cols()) {
    throw std::invalid_argument("from_dictionary_form: inconsistent model sizes");
  }
  if ((model.w.array() == 0.0).any()) {
    throw std::invalid_argument("from_dictionary_form: zero weights cannot be represented");
  }
  ModelParams params;
  params.v = model.w.cwiseAbs();
  params.U = model.D * params.v.asDiagonal();
  params.s.resize(model.w.size());
  for (Eigen::Index j = 0; j < model.w.size(); ++j) {
    params.s[j] = model.w[j] > 0 ? 1 : -1;
  }
  return params;
}

enum class SignPolicy { proportional, balanced };

//! Fixed sign pattern for the atoms: a contiguous +1 block, then -1.
//! positive_fraction is ignored (forced to 1/2) under the balanced policy.
inline IntVector make_sign_vector(int atoms, SignPolicy policy, double positive_fraction) {
  if (atoms < 2) throw std::invalid_argument("make_sign_vector: need at least two atoms");
  double fraction = policy == SignPolicy::balanced ? 0.5 : positive_fraction;
  if (!(fraction > 0 && fraction < 1)) {
    throw std::invalid_argument("make_sign_vector: positive fraction must lie in (0, 1)");
  }
  long positives = std::lround(fraction * atoms);
  if (positives < 1 || positives > atoms - 1) {
    throw std::invalid_argument("make_sign_vector: rounded positive count " +
                                std::to_string(positives) + " leaves an empty sign block");
  }
  IntVector s(atoms);
  for (int j = 0; j < atoms; ++j) s[j] = j < positives ? 1 : -1;
  return s;
}

}  // namespace last

#endif  // LAST_MODEL_HPP_
