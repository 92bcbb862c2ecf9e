#ifndef LAST_TYPES_HPP_
#define LAST_TYPES_HPP_

#include <Eigen/Core>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace last {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

//! Thrown when an iterative method produces non-finite iterates.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

//! Thrown on malformed input files; the message carries the location.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

//! Columns are samples. labels is the binary view (+1/-1); class_ids
//! optionally keeps the original multiclass ids (empty or one per sample).
struct LabeledDataset {
  Matrix features;            // n x m
  IntVector labels;           // m entries, each -1 or +1
  std::vector<int> class_ids; // empty, or m entries

  Eigen::Index dim() const { return features.rows(); }
  Eigen::Index size() const { return features.cols(); }

  void validate() const {
    if (features.rows() < 1 || features.cols() < 1) {
      throw std::invalid_argument("dataset: features must be non-empty");
    }
    if (!features.allFinite()) {
      throw std::invalid_argument("dataset: features contain non-finite values");
    }
    if (labels.size() != features.cols()) {
      throw std::invalid_argument("dataset: label count does not match sample count");
    }
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      if (labels[i] != 1 && labels[i] != -1) {
        throw std::invalid_argument("dataset: label at index " + std::to_string(i) +
                                    " is " + std::to_string(labels[i]) + ", expected -1 or +1");
      }
    }
    if (!class_ids.empty() && static_cast<Eigen::Index>(class_ids.size()) != features.cols()) {
      throw std::invalid_argument("dataset: class_ids size does not match sample count");
    }
  }

  //! Distinct class ids in ascending order (empty if class_ids unset).
  std::vector<int> distinct_classes() const {
    std::set<int> s(class_ids.begin(), class_ids.end());
    return {s.begin(), s.end()};
  }
};

//! Binary relabeling for a one-vs-all task: positive_class -> +1, rest -> -1.
inline LabeledDataset binary_view(const LabeledDataset& data, int positive_class) {
  LabeledDataset out;
  out.features = data.features;
  out.class_ids = data.class_ids;
  out.labels.resize(data.features.cols());
  if (data.class_ids.empty()) {
    throw std::invalid_argument("binary_view: dataset has no class ids");
  }
  for (Eigen::Index i = 0; i < out.labels.size(); ++i) {
    out.labels[i] = data.class_ids[static_cast<std::size_t>(i)] == positive_class ? 1 : -1;
  }
  return out;
}

//! Solver-side parameterization: score(x) = sum_j s_j * max(0, u_j'x - v_j).
struct ModelParams {
  Matrix U;     // n x N, column j is u_j
  Vector v;     // N thresholds, v >= epsilon > 0
  IntVector s;  // N fixed signs, each -1 or +1

  Eigen::Index dim() const { return U.rows(); }
  Eigen::Index atoms() const { return U.cols(); }

  void validate(double epsilon) const {
    if (U.rows() < 1 || U.cols() < 1) throw std::invalid_argument("params: U must be non-empty");
    if (v.size() != U.cols()) throw std::invalid_argument("params: v size does not match atom count");
    if (s.size() != U.cols()) throw std::invalid_argument("params: s size does not match atom count");
    if (!U.allFinite() || !v.allFinite()) {
      throw std::invalid_argument("params: non-finite entries");
    }
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      if (s[j] != 1 && s[j] != -1) throw std::invalid_argument("params: signs must be -1 or +1");
    }
    if ((v.array() < epsilon).any()) {
      throw std::invalid_argument("params: thresholds below the feasibility floor");
    }
  }
};

//! Classifier form: score(x) = w' * max(0, D'x - alpha).
struct DictionaryModel {
  Matrix D;            // n x N, column j is atom d_j
  Vector w;            // N weights
  double alpha = 1.0;  // shared threshold

  Eigen::Index dim() const { return D.rows(); }
  Eigen::Index atoms() const { return D.cols(); }

  void validate() const {
    if (D.rows() < 1 || D.cols() < 1) throw std::invalid_argument("model: D must be non-empty");
    if (w.size() != D.cols()) throw std::invalid_argument("model: w size does not match atom count");
    if (!D.allFinite() || !w.allFinite() || !std::isfinite(alpha)) {
      throw std::invalid_argument("model: non-finite entries");
    }
    if (alpha < 0) throw std::invalid_argument("model: alpha must be non-negative");
  }
};

//! One-vs-all ensemble. labels[c] is the class id of models[c].
struct MulticlassModel {
  std::vector<DictionaryModel> models;
  std::vector<int> labels;

  void validate() const {
    if (models.empty()) throw std::invalid_argument("multiclass model: no members");
    if (models.size() != labels.size()) {
      throw std::invalid_argument("multiclass model: label count does not match member count");
    }
    Eigen::Index n = models.front().dim();
    for (const auto& m : models) {
      m.validate();
      if (m.dim() != n) throw std::invalid_argument("multiclass model: members disagree on input dimension");
    }
    std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() != labels.size()) {
      throw std::invalid_argument("multiclass model: duplicate class labels");
    }
  }
};

}  // namespace last

#endif  // LAST_TYPES_HPP_
