#ifndef LAST_BASELINES_HPP_
#define LAST_BASELINES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <utility>
#include <vector>

#include "last/model.hpp"
#include "last/objective.hpp"
#include "last/rng.hpp"
#include "last/types.hpp"

namespace last {

struct KMeansResult {
  Matrix centroids;                // n x k
  std::vector<double> wcss_trace;  // within-cluster sum of squares per Lloyd round
};

//! Lloyd iterations from k distinct random samples. Assignment ties go to
//! the lowest centroid index; an emptied cluster is reseeded with the point
//! farthest from its current centroid, which keeps the objective monotone.
inline KMeansResult kmeans(const Matrix& X, int k, std::uint64_t seed, int max_iters = 100,
                           double tol = 1e-6) {
  const Eigen::Index m = X.cols();
  if (k < 1) throw std::invalid_argument("kmeans: need at least one cluster");
  if (m < k) {
    throw std::invalid_argument("kmeans: " + std::to_string(m) + " samples cannot fill " +
                                std::to_string(k) + " clusters");
  }
  Rng rng(seed);
  KMeansResult result;
  result.centroids.resize(X.rows(), k);
  auto init = rng.sample_without_replacement(static_cast<int>(m), k);
  for (int c = 0; c < k; ++c) result.centroids.col(c) = X.col(init[static_cast<std::size_t>(c)]);

  std::vector<int> assign(static_cast<std::size_t>(m), 0);
  Vector dist(m);
  double prev_wcss = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    // Assignment step.
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < m; ++i) {
      int best = 0;
      double best_d = (X.col(i) - result.centroids.col(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        double d = (X.col(i) - result.centroids.col(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assign[static_cast<std::size_t>(i)] = best;
      dist[i] = best_d;
      counts[static_cast<std::size_t>(best)]++;
    }
    // Reseed empty clusters from the farthest point of a non-singleton cluster.
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] < 2) continue;
        if (dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      if (far < 0) throw std::invalid_argument("kmeans: cannot fill empty cluster");
      counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(far)])]--;
      assign[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      result.centroids.col(c) = X.col(far);
      dist[far] = 0;
    }
    double wcss = dist.sum();
    result.wcss_trace.push_back(wcss);
    // Update step.
    Matrix sums = Matrix::Zero(X.rows(), k);
    for (Eigen::Index i = 0; i < m; ++i) {
      sums.col(assign[static_cast<std::size_t>(i)]) += X.col(i);
    }
    for (int c = 0; c < k; ++c) {
      result.centroids.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    if (prev_wcss - wcss <= tol * std::max(1.0, prev_wcss)) break;
    prev_wcss = wcss;
  }
  return result;
}

namespace detail {

inline std::pair<Matrix, Matrix> split_by_label(const LabeledDataset& data) {
  Eigen::Index npos = (data.labels.array() == 1).count();
  Matrix pos(data.dim(), npos), neg(data.dim(), data.size() - npos);
  Eigen::Index p = 0, q = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (data.labels[i] == 1) {
      pos.col(p++) = data.features.col(i);
    } else {
      neg.col(q++) = data.features.col(i);
    }
  }
  return {std::move(pos), std::move(neg)};
}

inline int positive_block(int atoms, double kappa) {
  if (!(kappa > 0 && kappa < 1)) {
    throw std::invalid_argument("class split: kappa must lie in (0, 1)");
  }
  long k = std::lround(kappa * atoms);
  if (k < 1 || k > atoms - 1) {
    throw std::invalid_argument("class split: rounded block size leaves a class without atoms");
  }
  return static_cast<int>(k);
}

}  // namespace detail

//! Class-stratified K-means dictionary: round(kappa*N) centroids from the
//! +1 samples followed by the rest from the -1 samples.
inline Matrix kmeans_supervised(const LabeledDataset& data, int atoms, double kappa,
                                std::uint64_t seed) {
  data.validate();
  if (atoms < 2) throw std::invalid_argument("kmeans_supervised: need at least two atoms");
  int kp = detail::positive_block(atoms, kappa);
  auto [pos, neg] = detail::split_by_label(data);
  if (pos.cols() < kp || neg.cols() < atoms - kp) {
    throw std::invalid_argument("kmeans_supervised: a class has fewer samples than clusters");
  }
  Matrix D(data.dim(), atoms);
  D.leftCols(kp) = kmeans(pos, kp, Rng::derive(seed, 0x2B)).centroids;
  D.rightCols(atoms - kp) = kmeans(neg, atoms - kp, Rng::derive(seed, 0x2C)).centroids;
  return D;
}

//! Class-stratified random dictionary: atoms are training samples drawn
//! without replacement, +1 block first.
inline Matrix random_samples_dict(const LabeledDataset& data, int atoms, double kappa,
                                  std::uint64_t seed) {
  data.validate();
  if (atoms < 2) throw std::invalid_argument("random_samples_dict: need at least two atoms");
  int kp = detail::positive_block(atoms, kappa);
  auto [pos, neg] = detail::split_by_label(data);
  if (pos.cols() < kp || neg.cols() < atoms - kp) {
    throw std::invalid_argument("random_samples_dict: a class has fewer samples than atoms");
  }
  Rng rng(seed);
  Matrix D(data.dim(), atoms);
  auto pick_pos = rng.sample_without_replacement(static_cast<int>(pos.cols()), kp);
  auto pick_neg = rng.sample_without_replacement(static_cast<int>(neg.cols()), atoms - kp);
  for (int j = 0; j < kp; ++j) D.col(j) = pos.col(pick_pos[static_cast<std::size_t>(j)]);
  for (int j = 0; j < atoms - kp; ++j) D.col(kp + j) = neg.col(pick_neg[static_cast<std::size_t>(j)]);
  return D;
}

//! Nearest-atom classifier; distance ties go to the lowest atom index.
inline int nn_classify(const Matrix& atoms, const IntVector& atom_labels,
                       const Eigen::Ref<const Vector>& x) {
  if (atoms.cols() < 1) throw std::invalid_argument("nn_classify: empty dictionary");
  if (atom_labels.size() != atoms.cols()) {
    throw std::invalid_argument("nn_classify: label count does not match atom count");
  }
  if (x.size() != atoms.rows()) throw std::invalid_argument("nn_classify: dimension mismatch");
  Eigen::Index best = 0;
  double best_d = (x - atoms.col(0)).squaredNorm();
  for (Eigen::Index j = 1; j < atoms.cols(); ++j) {
    double d = (x - atoms.col(j)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return atom_labels[best];
}

struct LinearModel {
  Vector w;
  double bias = 0.0;
};

inline double linear_hinge_objective(const LinearModel& model, const LabeledDataset& data,
                                     double nu) {
  Vector scores = data.features.transpose() * model.w;
  scores.array() += model.bias;
  double loss = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    loss += hinge(data.labels[i] * scores[i]);
  }
  return loss + 0.5 * nu * model.w.squaredNorm();
}

inline double linear_error(const LinearModel& model, const LabeledDataset& data) {
  Vector scores = data.features.transpose() * model.w;
  scores.array() += model.bias;
  Eigen::Index wrong = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (predict_label(scores[i]) != data.labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

namespace detail {

// Full-batch subgradient descent with a monotonicity guard: a step that
// would increase the objective is rejected and the stepsize halved, so the
// objective trace never increases.
inline LinearModel hinge_descent(const LabeledDataset& data, double nu, int iters,
                                 bool fit_bias = true) {
  LinearModel model{Vector::Zero(data.dim()), 0.0};
  double obj = linear_hinge_objective(model, data, nu);
  double eta = 1.0;
  const auto m = static_cast<double>(data.size());
  for (int t = 0; t < iters && eta > 1e-14; ++t) {
    Vector scores = data.features.transpose() * model.w;
    scores.array() += model.bias;
    Vector coeff = Vector::Zero(data.size());
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      double y = data.labels[i];
      if (1.0 - y * scores[i] > 0) coeff[i] = y;
    }
    Vector gw = nu * model.w - data.features * coeff;
    double gb = fit_bias ? -coeff.sum() : 0.0;
    LinearModel next{model.w - (eta / m) * gw, model.bias - (eta / m) * gb};
    double next_obj = linear_hinge_objective(next, data, nu);
    if (next_obj <= obj) {
      model = std::move(next);
      obj = next_obj;
      eta = std::min(eta * 1.2, 16.0);
    } else {
      eta *= 0.5;
    }
  }
  return model;
}

inline std::vector<std::vector<int>> make_folds(Eigen::Index m, int folds, std::uint64_t seed) {
  Rng rng(seed);
  auto perm = rng.sample_without_replacement(static_cast<int>(m), static_cast<int>(m));
  std::vector<std::vector<int>> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out[i % static_cast<std::size_t>(folds)].push_back(perm[i]);
  }
  return out;
}

inline LabeledDataset gather(const LabeledDataset& data, const std::vector<int>& idx) {
  LabeledDataset out;
  out.features.resize(data.dim(), static_cast<Eigen::Index>(idx.size()));
  out.labels.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.features.col(static_cast<Eigen::Index>(i)) = data.features.col(idx[i]);
    out.labels[static_cast<Eigen::Index>(i)] = data.labels[idx[i]];
  }
  return out;
}

}  // namespace detail

//! Linear hinge classifier. A positive nu is used as given; nu <= 0 selects
//! from {0.01, 0.1, 1, 10} by 5-fold cross-validation (ties to the smaller).
//! fit_bias = false keeps the separator through the origin, matching
//! protocols that drop the classifier bias.
inline LinearModel train_linear_hinge(const LabeledDataset& data, double nu, std::uint64_t seed,
                                      int iters = 500, bool fit_bias = true) {
  data.validate();
  if (iters < 1) throw std::invalid_argument("train_linear_hinge: need at least one iteration");
  if (nu > 0) return detail::hinge_descent(data, nu, iters, fit_bias);

  const std::vector<double> grid{0.01, 0.1, 1.0, 10.0};
  int folds = static_cast<int>(std::min<Eigen::Index>(5, data.size()));
  if (folds < 2) return detail::hinge_descent(data, grid.front(), iters, fit_bias);
  auto fold_idx = detail::make_folds(data.size(), folds, Rng::derive(seed, 0x5F));
  double best_err = std::numeric_limits<double>::infinity();
  double best_nu = grid.front();
  for (double cand : grid) {
    double err = 0;
    for (int f = 0; f < folds; ++f) {
      std::vector<int> train_idx;
      for (int g = 0; g < folds; ++g) {
        if (g == f) continue;
        train_idx.insert(train_idx.end(), fold_idx[static_cast<std::size_t>(g)].begin(),
                         fold_idx[static_cast<std::size_t>(g)].end());
      }
      LinearModel fold_model =
          detail::hinge_descent(detail::gather(data, train_idx), cand, iters, fit_bias);
      err += linear_error(fold_model, detail::gather(data, fold_idx[static_cast<std::size_t>(f)])) *
             static_cast<double>(fold_idx[static_cast<std::size_t>(f)].size());
    }
    if (err < best_err) {
      best_err = err;
      best_nu = cand;
    }
  }
  return detail::hinge_descent(data, best_nu, iters, fit_bias);
}

struct EncoderConfig {
  double lambda = 0.1;
  double step = 0.0;      // <= 0: use 1 / |D'D|_2
  int max_iters = 1000;
  double tol = 1e-8;
  bool nonneg = true;

  void validate() const {
    if (!(lambda >= 0)) throw std::invalid_argument("encoder config: lambda must be >= 0");
    if (max_iters < 1) throw std::invalid_argument("encoder config: max_iters must be >= 1");
    if (!(tol >= 0)) throw std::invalid_argument("encoder config: tol must be >= 0");
  }
};

//! Reconstruction objective decreased by the proximal iterations:
//! (1/2)|x - Dc|^2 + lambda |c|_1 (nonnegativity handled by the prox).
inline double sparse_coding_objective(const Matrix& D, const Eigen::Ref<const Vector>& x,
                                      const Eigen::Ref<const Vector>& c, double lambda) {
  return 0.5 * (x - D * c).squaredNorm() + lambda * c.lpNorm<1>();
}

namespace detail {

inline double spectral_norm_gram(const Matrix& D) {
  // Power iteration on D'D; deterministic start.
  Vector u = Vector::Ones(D.cols()).normalized();
  double lambda = 0;
  for (int it = 0; it < 200; ++it) {
    Vector next = D.transpose() * (D * u);
    double norm = next.norm();
    if (norm == 0) return 0;
    next /= norm;
    double delta = (next - u).norm();
    u = next;
    lambda = norm;
    if (delta < 1e-12) break;
  }
  return lambda;
}

inline Vector ista_iterate(const Matrix& D, const Eigen::Ref<const Vector>& x,
                           const EncoderConfig& cfg, double t) {
  Vector c = Vector::Zero(D.cols());
  const double shrink = cfg.lambda * t;
  for (int k = 0; k < cfg.max_iters; ++k) {
    Vector z = c + t * (D.transpose() * (x - D * c));
    Vector next(z.size());
    if (cfg.nonneg) {
      next = (z.array() - shrink).cwiseMax(0.0);
    } else {
      next = z.array().sign() * (z.array().abs() - shrink).cwiseMax(0.0);
    }
    if (!next.allFinite()) {
      throw DivergenceError("nnsc_encode: non-finite iterate at step " + std::to_string(k + 1));
    }
    double change = (next - c).lpNorm<Eigen::Infinity>();
    c = std::move(next);
    if (change <= cfg.tol) break;
  }
  return c;
}

}  // namespace detail

//! Proximal-gradient sparse coding: c <- prox(c + t D'(x - Dc)) from c = 0.
//! With the nonnegative prox, one iteration at t = 1 reproduces the
//! one-sided soft-thresholding encoder max(0, D'x - lambda).
inline Vector nnsc_encode(const Matrix& D, const Eigen::Ref<const Vector>& x,
                          const EncoderConfig& cfg) {
  cfg.validate();
  if (x.size() != D.rows()) throw std::invalid_argument("nnsc_encode: dimension mismatch");
  double t = cfg.step;
  if (t <= 0) {
    double norm = detail::spectral_norm_gram(D);
    t = norm > 0 ? 1.0 / norm : 1.0;
  } else if (cfg.max_iters > 1) {
    double norm = detail::spectral_norm_gram(D);
    if (norm > 0 && t > 1.0 / norm + 1e-12) {
      std::cerr << "nnsc_encode: step " << t << " exceeds 1/|D'D| = " << 1.0 / norm
                << "; convergence is not guaranteed\n";
    }
  }
  return detail::ista_iterate(D, x, cfg, t);
}

//! Column-wise encoding of a sample matrix; the step check runs once.
inline Matrix nnsc_encode_all(const Matrix& D, const Matrix& X, const EncoderConfig& cfg) {
  cfg.validate();
  if (X.rows() != D.rows()) throw std::invalid_argument("nnsc_encode_all: dimension mismatch");
  double t = cfg.step;
  double norm = detail::spectral_norm_gram(D);
  if (t <= 0) {
    t = norm > 0 ? 1.0 / norm : 1.0;
  } else if (cfg.max_iters > 1 && norm > 0 && t > 1.0 / norm + 1e-12) {
    std::cerr << "nnsc_encode_all: step " << t << " exceeds 1/|D'D| = " << 1.0 / norm
              << "; convergence is not guaranteed\n";
  }
  Matrix C(D.cols(), X.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    C.col(i) = detail::ista_iterate(D, X.col(i), cfg, t);
  }
  return C;
}

struct PipelineResult {
  double alpha = 0.0;
  LinearModel model;
  double cv_accuracy = 0.0;
  std::vector<std::pair<double, double>> grid_accuracies;  // (alpha, cv accuracy)
};

namespace detail {

inline LabeledDataset encode_dataset(const Matrix& D, const LabeledDataset& data, double alpha) {
  LabeledDataset out;
  out.features = ((D.transpose() * data.features).array() - alpha).cwiseMax(0.0).matrix();
  out.labels = data.labels;
  out.class_ids = data.class_ids;
  return out;
}

}  // namespace detail

//! Fixed-dictionary protocol: encode with max(0, D'x - alpha), score each
//! alpha by 5-fold cross-validated accuracy of a linear hinge classifier,
//! then refit on all samples at the winning alpha (ties to the smaller).
inline PipelineResult fixed_encoder_pipeline(const Matrix& D, const LabeledDataset& data,
                                             std::vector<double> alpha_grid, std::uint64_t seed,
                                             int hinge_iters = 500) {
  data.validate();
  if (D.rows() != data.dim()) throw std::invalid_argument("fixed_encoder_pipeline: dimension mismatch");
  if (alpha_grid.empty()) throw std::invalid_argument("fixed_encoder_pipeline: empty alpha grid");
  for (double a : alpha_grid) {
    if (!(a >= 0)) throw std::invalid_argument("fixed_encoder_pipeline: alphas must be >= 0");
  }
  std::sort(alpha_grid.begin(), alpha_grid.end());
  alpha_grid.erase(std::unique(alpha_grid.begin(), alpha_grid.end()), alpha_grid.end());

  int folds = static_cast<int>(std::min<Eigen::Index>(5, data.size()));
  if (folds < 2) throw std::invalid_argument("fixed_encoder_pipeline: need at least two samples");
  auto fold_idx = detail::make_folds(data.size(), folds, Rng::derive(seed, 0x70));

  PipelineResult result;
  double best_acc = -1;
  for (double alpha : alpha_grid) {
    LabeledDataset encoded = detail::encode_dataset(D, data, alpha);
    Eigen::Index correct = 0;
    for (int f = 0; f < folds; ++f) {
      std::vector<int> train_idx;
      for (int g = 0; g < folds; ++g) {
        if (g == f) continue;
        train_idx.insert(train_idx.end(), fold_idx[static_cast<std::size_t>(g)].begin(),
                         fold_idx[static_cast<std::size_t>(g)].end());
      }
      LinearModel fm = train_linear_hinge(detail::gather(encoded, train_idx), 0.0,
                                          Rng::derive(seed, 0x71 + static_cast<std::uint64_t>(f)),
                                          hinge_iters);
      LabeledDataset test = detail::gather(encoded, fold_idx[static_cast<std::size_t>(f)]);
      correct += static_cast<Eigen::Index>(
          std::llround((1.0 - linear_error(fm, test)) * static_cast<double>(test.size())));
    }
    double acc = static_cast<double>(correct) / static_cast<double>(data.size());
    result.grid_accuracies.emplace_back(alpha, acc);
    if (acc > best_acc) {
      best_acc = acc;
      result.alpha = alpha;
    }
  }
  result.cv_accuracy = best_acc;
  LabeledDataset encoded = detail::encode_dataset(D, data, result.alpha);
  result.model = train_linear_hinge(encoded, 0.0, Rng::derive(seed, 0x7F), hinge_iters);
  return result;
}

}  // namespace last

#endif  // LAST_BASELINES_HPP_
