#ifndef LAST_EVALUATION_HPP_
#define LAST_EVALUATION_HPP_

#include <algorithm>
#include <chrono>
#include <map>
#include <vector>

#include "last/model.hpp"
#include "last/serialize.hpp"
#include "last/types.hpp"

namespace last {

struct EvalReport {
  double error_rate = 0.0;
  std::map<int, double> per_class_error;  // true class -> fraction misclassified
  std::map<int, int> per_class_count;
  double feature_sparsity = 0.0;  // mean fraction of exact zeros in the encoding
  double predict_seconds = 0.0;
};

namespace detail {

inline double sparsity_fraction(const DictionaryModel& model, const Matrix& X) {
  Matrix F = ((model.D.transpose() * X).array() - model.alpha).cwiseMax(0.0).matrix();
  auto zeros = static_cast<double>((F.array() == 0.0).count());
  return zeros / static_cast<double>(F.size());
}

}  // namespace detail

//! Binary test-set metrics: 0-1 error against the +-1 labels, error split by
//! true class, sparsity of max(0, D'x - alpha), and prediction wall time.
inline EvalReport evaluate(const DictionaryModel& model, const LabeledDataset& data) {
  model.validate();
  data.validate();
  if (model.dim() != data.dim()) throw std::invalid_argument("evaluate: dimension mismatch");

  EvalReport report;
  auto started = std::chrono::steady_clock::now();
  Vector scores = predict_scores(model, data.features);
  report.predict_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  std::map<int, int> wrong;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    int truth = data.labels[i];
    report.per_class_count[truth]++;
    if (predict_label(scores[i]) != truth) wrong[truth]++;
  }
  int total_wrong = 0;
  for (auto& [cls, count] : report.per_class_count) {
    report.per_class_error[cls] = static_cast<double>(wrong[cls]) / static_cast<double>(count);
    total_wrong += wrong[cls];
  }
  report.error_rate = static_cast<double>(total_wrong) / static_cast<double>(data.size());
  report.feature_sparsity = detail::sparsity_fraction(model, data.features);
  return report;
}

//! One-vs-all test-set metrics against the dataset's class ids. Sparsity is
//! measured over the concatenated encodings of all members.
inline EvalReport evaluate(const MulticlassModel& model, const LabeledDataset& data) {
  model.validate();
  data.validate();
  if (data.class_ids.empty()) {
    throw std::invalid_argument("evaluate: multiclass evaluation needs class ids");
  }
  if (model.models.front().dim() != data.dim()) {
    throw std::invalid_argument("evaluate: dimension mismatch");
  }

  EvalReport report;
  const auto C = model.models.size();
  Matrix scores(static_cast<Eigen::Index>(C), data.size());
  auto started = std::chrono::steady_clock::now();
  for (std::size_t c = 0; c < C; ++c) {
    scores.row(static_cast<Eigen::Index>(c)) = predict_scores(model.models[c], data.features).transpose();
  }
  std::vector<int> predicted(static_cast<std::size_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    double best_score = scores(0, i);
    int best_label = model.labels[0];
    for (std::size_t c = 1; c < C; ++c) {
      double sc = scores(static_cast<Eigen::Index>(c), i);
      int label = model.labels[c];
      if (sc > best_score || (sc == best_score && label < best_label)) {
        best_score = sc;
        best_label = label;
      }
    }
    predicted[static_cast<std::size_t>(i)] = best_label;
  }
  report.predict_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  std::map<int, int> wrong;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    int truth = data.class_ids[static_cast<std::size_t>(i)];
    report.per_class_count[truth]++;
    if (predicted[static_cast<std::size_t>(i)] != truth) wrong[truth]++;
  }
  int total_wrong = 0;
  for (auto& [cls, count] : report.per_class_count) {
    report.per_class_error[cls] = static_cast<double>(wrong[cls]) / static_cast<double>(count);
    total_wrong += wrong[cls];
  }
  report.error_rate = static_cast<double>(total_wrong) / static_cast<double>(data.size());

  double sparsity = 0;
  for (const auto& member : model.models) {
    sparsity += detail::sparsity_fraction(member, data.features);
  }
  report.feature_sparsity = sparsity / static_cast<double>(C);
  return report;
}

inline EvalReport evaluate(const StoredModel& stored, const LabeledDataset& data) {
  if (stored.kind == StoredModel::Kind::binary) return evaluate(stored.binary(), data);
  return evaluate(stored.model, data);
}

struct BenchResult {
  double seconds_total = 0.0;       // median over repeats
  double seconds_per_sample = 0.0;  // median divided by the sample count
  std::vector<double> repeat_seconds;
};

namespace detail {

template <typename Predict>
inline BenchResult run_benchmark(Eigen::Index samples, int repeats, Predict&& predict) {
  if (repeats < 1) throw std::invalid_argument("benchmark_predict: need at least one repeat");
  BenchResult result;
  volatile double sink = 0.0;
  sink = sink + predict();  // warm-up pass, excluded from the measurements
  result.repeat_seconds.reserve(static_cast<std::size_t>(repeats));
  for (int r = 0; r < repeats; ++r) {
    auto started = std::chrono::steady_clock::now();
    double checksum = predict();
    auto elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    sink = sink + checksum;
    result.repeat_seconds.push_back(elapsed);
  }
  std::vector<double> sorted = result.repeat_seconds;
  std::sort(sorted.begin(), sorted.end());
  result.seconds_total = sorted[sorted.size() / 2];
  if (sorted.size() % 2 == 0) {
    result.seconds_total = 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
  }
  result.seconds_per_sample = result.seconds_total / static_cast<double>(samples);
  return result;
}

}  // namespace detail

//! Median wall time of full test-set prediction over the given repeats
//! (one untimed warm-up pass first).
inline BenchResult benchmark_predict(const DictionaryModel& model, const LabeledDataset& data,
                                     int repeats) {
  model.validate();
  data.validate();
  if (model.dim() != data.dim()) throw std::invalid_argument("benchmark_predict: dimension mismatch");
  return detail::run_benchmark(data.size(), repeats,
                               [&] { return predict_scores(model, data.features).sum(); });
}

inline BenchResult benchmark_predict(const MulticlassModel& model, const LabeledDataset& data,
                                     int repeats) {
  model.validate();
  data.validate();
  if (model.models.front().dim() != data.dim()) {
    throw std::invalid_argument("benchmark_predict: dimension mismatch");
  }
  return detail::run_benchmark(data.size(), repeats, [&] {
    double checksum = 0;
    for (const auto& member : model.models) {
      checksum += predict_scores(member, data.features).sum();
    }
    return checksum;
  });
}

}  // namespace last

#endif  // LAST_EVALUATION_HPP_
