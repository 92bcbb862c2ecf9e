#ifndef LAST_SGD_HPP_
#define LAST_SGD_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "last/model.hpp"
#include "last/objective.hpp"
#include "last/rng.hpp"
#include "last/solver.hpp"
#include "last/types.hpp"

namespace last {

struct SgdConfig {
  long long iterations = 250000;
  int minibatch = 10;
  std::vector<double> step_grid{0.1, 0.01, 0.001, 0.0001};
  double validation_fraction = 0.10;
  double nu = 1.0;
  double beta = 100.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations < 0) throw std::invalid_argument("sgd config: iterations must be >= 0");
    if (minibatch < 1) throw std::invalid_argument("sgd config: minibatch must be >= 1");
    if (step_grid.empty()) throw std::invalid_argument("sgd config: empty step grid");
    for (double s : step_grid) {
      if (!(s > 0)) throw std::invalid_argument("sgd config: steps must be positive");
    }
    if (!(validation_fraction >= 0 && validation_fraction < 1)) {
      throw std::invalid_argument("sgd config: validation fraction must lie in [0, 1)");
    }
    if (!(nu > 0) || !(beta > 0)) {
      throw std::invalid_argument("sgd config: nu and beta must be positive");
    }
  }
};

//! Smoothed joint objective optimized by plain SGD:
//! J(D, w) = sum_i max(0, 1 - y_i w'q(D'x_i - 1)) + (nu/2) |w|^2.
inline double sgd_objective(const DictionaryModel& model, const LabeledDataset& data, double nu,
                            double beta) {
  if (model.dim() != data.dim()) throw std::invalid_argument("sgd_objective: dimension mismatch");
  Matrix Z = model.D.transpose() * data.features;
  Z.array() -= model.alpha;
  Matrix Q = Z.unaryExpr([beta](double x) { return detail::softplus_value(x, beta); });
  Vector scores = Q.transpose() * model.w;
  double loss = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    loss += hinge(data.labels[i] * scores[i]);
  }
  return loss + 0.5 * nu * model.w.squaredNorm();
}

//! Full-batch gradient of J; the hinge kink takes the inactive (zero) branch.
inline void sgd_gradient(const DictionaryModel& model, const LabeledDataset& data, double nu,
                         double beta, Matrix& grad_D, Vector& grad_w) {
  if (model.dim() != data.dim()) throw std::invalid_argument("sgd_gradient: dimension mismatch");
  Matrix Z = model.D.transpose() * data.features;  // N x m
  Z.array() -= model.alpha;
  Matrix Q = Z.unaryExpr([beta](double x) { return detail::softplus_value(x, beta); });
  Matrix Qp = Z.unaryExpr([beta](double x) { return detail::softplus_derivative(x, beta); });
  Vector scores = Q.transpose() * model.w;
  Vector coeff(data.size());  // y_i where the hinge is active, else 0
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    double y = data.labels[i];
    coeff[i] = (1.0 - y * scores[i]) > 0 ? y : 0.0;
  }
  grad_w = nu * model.w - Q * coeff;
  Matrix C = Qp.array() * (model.w * coeff.transpose()).array();  // N x m
  grad_D.noalias() = -(data.features * C.transpose());
}

namespace detail {

inline std::pair<std::vector<int>, std::vector<int>> sgd_split(Eigen::Index m, double fraction,
                                                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> perm = rng.sample_without_replacement(static_cast<int>(m), static_cast<int>(m));
  auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(m)));
  if (fraction > 0 && held == 0) held = 1;
  if (held >= static_cast<std::size_t>(m)) held = static_cast<std::size_t>(m) - 1;
  std::vector<int> validation(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(held));
  std::vector<int> training(perm.begin() + static_cast<std::ptrdiff_t>(held), perm.end());
  return {std::move(training), std::move(validation)};
}

inline LabeledDataset take_columns(const LabeledDataset& data, const std::vector<int>& idx) {
  LabeledDataset out;
  out.features.resize(data.dim(), static_cast<Eigen::Index>(idx.size()));
  out.labels.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.features.col(static_cast<Eigen::Index>(i)) = data.features.col(idx[i]);
    out.labels[static_cast<Eigen::Index>(i)] = data.labels[idx[i]];
    if (!data.class_ids.empty()) out.class_ids.push_back(data.class_ids[static_cast<std::size_t>(idx[i])]);
  }
  return out;
}

// 0-1 error of the exact two-step classifier sign(w' max(0, D'x - alpha)).
inline double zero_one_error(const DictionaryModel& model, const LabeledDataset& data) {
  Vector scores = predict_scores(model, data.features);
  Eigen::Index wrong = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (predict_label(scores[i]) != data.labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

}  // namespace detail

//! Joint minibatch SGD over (D, w) with a constant stepsize chosen on a
//! held-out split: every candidate runs the full budget from the same
//! initialization, and the lowest validation error wins.
inline std::pair<DictionaryModel, TrainReport> train_sgd(const LabeledDataset& data, int atoms,
                                                         const SgdConfig& cfg) {
  data.validate();
  cfg.validate();
  if (atoms < 1) throw std::invalid_argument("train_sgd: need at least one atom");
  const Eigen::Index m = data.size();
  if (m < 2) throw std::invalid_argument("train_sgd: need at least two samples");

  auto [train_idx, val_idx] = detail::sgd_split(m, cfg.validation_fraction, Rng::derive(cfg.seed, 0x00));
  LabeledDataset train = detail::take_columns(data, train_idx);
  LabeledDataset validation = detail::take_columns(data, val_idx);
  const auto mt = static_cast<double>(train.size());

  Rng init_rng(Rng::derive(cfg.seed, 0x01));
  Matrix D0(data.dim(), atoms);
  {
    auto avail = static_cast<int>(train.size());
    if (atoms <= avail) {
      auto picks = init_rng.sample_without_replacement(avail, atoms);
      for (int j = 0; j < atoms; ++j) D0.col(j) = train.features.col(picks[static_cast<std::size_t>(j)]);
    } else {
      for (int j = 0; j < atoms; ++j) D0.col(j) = train.features.col(init_rng.below_int(avail));
    }
  }
  Vector w0(atoms);
  for (Eigen::Index j = 0; j < atoms; ++j) w0[j] = init_rng.uniform(-0.01, 0.01);

  DictionaryModel best;
  double best_error = std::numeric_limits<double>::infinity();
  double best_step = 0;
  bool found = false;

  for (std::size_t c = 0; c < cfg.step_grid.size(); ++c) {
    const double step = cfg.step_grid[c];
    Matrix D = D0;
    Vector w = w0;
    Rng rng(Rng::derive(cfg.seed, 0x10 + c));
    const int B = static_cast<int>(std::min<Eigen::Index>(cfg.minibatch, train.size()));
    const double scale = mt / static_cast<double>(B);
    Matrix Xb(data.dim(), B);
    Vector coeff(B);
    bool diverged = false;

    for (long long t = 0; t < cfg.iterations; ++t) {
      for (int i = 0; i < B; ++i) {
        auto idx = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(train.size())));
        Xb.col(i) = train.features.col(idx);
        coeff[i] = train.labels[idx];
      }
      Matrix Z = D.transpose() * Xb;
      Z.array() -= 1.0;
      Matrix Q = Z.unaryExpr([&](double x) { return detail::softplus_value(x, cfg.beta); });
      Matrix Qp = Z.unaryExpr([&](double x) { return detail::softplus_derivative(x, cfg.beta); });
      Vector scores = Q.transpose() * w;
      Vector act = coeff;  // y_i if hinge active else 0
      for (int i = 0; i < B; ++i) {
        if (!(1.0 - coeff[i] * scores[i] > 0)) act[i] = 0.0;
      }
      Vector gw = cfg.nu * w - scale * (Q * act);
      Matrix C = Qp.array() * (w * act.transpose()).array();
      w -= step * gw;
      D += (step * scale) * (Xb * C.transpose());
      if (t % 128 == 0 && (!D.allFinite() || !w.allFinite())) {
        diverged = true;
        break;
      }
    }
    if (diverged || !D.allFinite() || !w.allFinite()) continue;

    DictionaryModel cand{D, w, 1.0};
    double err = validation.size() > 0 ? detail::zero_one_error(cand, validation)
                                       : sgd_objective(cand, train, cfg.nu, cfg.beta);
    if (err < best_error) {
      best_error = err;
      best = cand;
      best_step = step;
      found = true;
    }
  }
  if (!found) throw DivergenceError("train_sgd: every candidate stepsize diverged");

  TrainReport report;
  report.chosen_rho = best_step;
  report.termination = TerminationCause::max_iterations;
  DictionaryModel init{D0, w0, 1.0};
  report.objective_trace = {sgd_objective(init, train, cfg.nu, cfg.beta),
                            sgd_objective(best, train, cfg.nu, cfg.beta)};
  if ((best.w.array() != 0.0).all()) {
    report.final_params = from_dictionary_form(best);
  }
  return {std::move(best), std::move(report)};
}

}  // namespace last

#endif  // LAST_SGD_HPP_
