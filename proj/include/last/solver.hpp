#ifndef LAST_SOLVER_HPP_
#define LAST_SOLVER_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "last/model.hpp"
#include "last/objective.hpp"
#include "last/rng.hpp"
#include "last/types.hpp"

namespace last {

struct SolverConfig {
  int max_outer = 50;       // outer linearization steps
  double delta = 1e-4;      // termination threshold on parameter change
  int inner_iters = 0;      // subgradient steps per subproblem; 0 = auto
  int batch_size = 0;       // subgradient minibatch; 0 = auto
  int batch_threshold = 5000;  // below this sample count, use the full batch
  std::vector<double> rho_grid{0.1, 0.01, 0.001};
  int eval_subsample = 2000;   // sample cap for stepsize-trial scoring
  std::uint64_t seed = 0;
  ObjectiveConfig objective;

  void validate() const {
    objective.validate();
    if (max_outer < 1) throw std::invalid_argument("solver config: max_outer must be >= 1");
    if (!(delta >= 0)) throw std::invalid_argument("solver config: delta must be >= 0");
    if (inner_iters < 0 || batch_size < 0) {
      throw std::invalid_argument("solver config: iteration counts must be non-negative");
    }
    if (batch_threshold < 1) throw std::invalid_argument("solver config: batch threshold must be >= 1");
    if (eval_subsample < 1) throw std::invalid_argument("solver config: eval subsample must be >= 1");
    if (rho_grid.empty()) throw std::invalid_argument("solver config: empty stepsize grid");
    for (double r : rho_grid) {
      if (!(r > 0)) throw std::invalid_argument("solver config: stepsizes must be positive");
    }
  }

  //! Batch-size rule: small problems run full-batch with a shorter budget,
  //! large ones run 200-sample minibatches with a longer one.
  SolverConfig resolved(Eigen::Index samples) const {
    SolverConfig c = *this;
    bool small = samples < batch_threshold;
    if (c.batch_size == 0) c.batch_size = small ? static_cast<int>(samples) : 200;
    if (c.inner_iters == 0) c.inner_iters = small ? 1000 : 5000;
    if (c.batch_size > samples) c.batch_size = static_cast<int>(samples);
    return c;
  }
};

enum class TerminationCause { max_iterations, converged };

inline const char* to_string(TerminationCause c) {
  return c == TerminationCause::converged ? "converged" : "max-iterations";
}

struct TrainReport {
  std::vector<double> objective_trace;  // relaxed objective at init and after each outer step
  double chosen_rho = 0.0;
  TerminationCause termination = TerminationCause::max_iterations;
  std::vector<double> inner_seconds;    // wall-clock per subproblem solve
  ModelParams final_params;
};

//! Stepsize schedule: constant for the first t0 steps, then decaying as
//! rho * t0 / t.
inline double rho_schedule(int t, double rho, double t0) {
  return std::min(rho, rho * t0 / static_cast<double>(t));
}

//! Largest componentwise change between iterates, where each entry counts
//! the smaller of its absolute and relative change (relative to prev).
inline double termination_metric(const ModelParams& prev, const ModelParams& curr) {
  if (prev.U.rows() != curr.U.rows() || prev.U.cols() != curr.U.cols() ||
      prev.v.size() != curr.v.size()) {
    throw std::invalid_argument("termination_metric: iterate shapes differ");
  }
  auto entry_metric = [](double before, double after) {
    double abs_change = std::abs(after - before);
    if (before == 0.0) return abs_change;
    return std::min(abs_change, std::abs(abs_change / before));
  };
  double metric = 0;
  for (Eigen::Index r = 0; r < prev.U.rows(); ++r) {
    for (Eigen::Index c = 0; c < prev.U.cols(); ++c) {
      metric = std::max(metric, entry_metric(prev.U(r, c), curr.U(r, c)));
    }
  }
  for (Eigen::Index j = 0; j < prev.v.size(); ++j) {
    metric = std::max(metric, entry_metric(prev.v[j], curr.v[j]));
  }
  return metric;
}

namespace detail {

// Subgradient step direction for the linearized subproblem estimated from the
// sample columns in Xb: scale * sum_batch(max-branch terms) + full tail
// (nu v - b, -A), where scale = m_total / batch. With the full batch this is
// an exact subgradient of the Eq-style objective g - <U,A> - v'b.
struct BatchWork {
  Matrix Z, Q, Qp, G;
  Vector plus, minus;
};

inline void batch_subgradient(const ModelParams& params, const Matrix& Xb, const IntVector& yb,
                              const LinearizationPoint& lin, double scale,
                              const ObjectiveConfig& cfg, Matrix& gU, Vector& gv,
                              BatchWork& work, double* data_max_sum) {
  const double beta = cfg.beta;
  const Eigen::Index N = params.atoms();
  const Eigen::Index B = Xb.cols();

  work.Z.noalias() = params.U.transpose() * Xb;
  work.Z.colwise() -= params.v;
  work.Q = work.Z.unaryExpr([beta](double x) { return softplus_value(x, beta); });
  work.Qp = work.Z.unaryExpr([beta](double x) { return softplus_derivative(x, beta); });

  work.plus.resize(B);
  work.minus.resize(B);
  work.plus.setZero();
  work.minus.setZero();
  for (Eigen::Index j = 0; j < N; ++j) {
    if (params.s[j] > 0) {
      work.plus += work.Q.row(j).transpose();
    } else {
      work.minus += work.Q.row(j).transpose();
    }
  }

  if (data_max_sum != nullptr) *data_max_sum = 0;
  work.G = work.Qp;
  for (Eigen::Index i = 0; i < B; ++i) {
    double same = yb[i] > 0 ? work.plus[i] : work.minus[i];
    double diff = yb[i] > 0 ? work.minus[i] : work.plus[i];
    bool same_branch = same > 1.0 + diff;
    if (data_max_sum != nullptr) *data_max_sum += std::max(same, 1.0 + diff);
    int active_sign = same_branch ? yb[i] : -yb[i];
    for (Eigen::Index j = 0; j < N; ++j) {
      if (params.s[j] != active_sign) work.G(j, i) = 0.0;
    }
  }

  gU.noalias() = scale * (Xb * work.G.transpose());
  gU -= lin.A;
  gv = -scale * work.G.rowwise().sum();
  gv += cfg.nu * params.v - lin.b;
}

// Projected subgradient iterations t_begin..t_end at a fixed base stepsize.
// In full-batch mode the best iterate by subproblem objective is returned
// (candidates: start, every visited iterate, and *extra_candidate if given);
// in minibatch mode the last iterate is returned.
inline ModelParams run_inner(const ModelParams& start, const LinearizationPoint& lin,
                             const LabeledDataset& data, const SolverConfig& cfg, double rho,
                             int t_begin, int t_end, Rng& rng,
                             const ModelParams* extra_candidate = nullptr) {
  const Eigen::Index m = data.size();
  const int B = cfg.batch_size;
  const bool full_batch = B >= m;
  const double t0 = static_cast<double>(cfg.inner_iters) / 10.0;
  const double scale = static_cast<double>(m) / static_cast<double>(B);
  const double eps = cfg.objective.epsilon;

  ModelParams params = start;
  ModelParams best = start;
  double best_obj = std::numeric_limits<double>::infinity();
  auto tail_obj = [&](const ModelParams& p) {
    return 0.5 * cfg.objective.nu * p.v.squaredNorm() - p.U.cwiseProduct(lin.A).sum() -
           p.v.dot(lin.b);
  };
  if (full_batch && extra_candidate != nullptr) {
    best = *extra_candidate;
    best_obj = linearized_objective(*extra_candidate, lin, data, cfg.objective);
  }

  BatchWork work;
  Matrix gU;
  Vector gv;
  Matrix Xb;
  IntVector yb;
  double max_sum = 0;

  for (int t = t_begin; t <= t_end; ++t) {
    const Matrix* X = &data.features;
    const IntVector* y = &data.labels;
    if (!full_batch) {
      Xb.resize(data.dim(), B);
      yb.resize(B);
      for (int i = 0; i < B; ++i) {
        auto idx = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m)));
        Xb.col(i) = data.features.col(idx);
        yb[i] = data.labels[idx];
      }
      X = &Xb;
      y = &yb;
    }
    batch_subgradient(params, *X, *y, lin, scale, cfg.objective, gU, gv, work,
                      full_batch ? &max_sum : nullptr);
    if (full_batch) {
      // max_sum was computed at the pre-step iterate; track the best seen.
      double obj = max_sum + tail_obj(params);
      if (obj < best_obj) {
        best_obj = obj;
        best = params;
      }
    }
    double step = rho_schedule(t, rho, t0);
    params.U -= step * gU;
    params.v = (params.v - step * gv).cwiseMax(eps);
    if (!params.U.allFinite() || !params.v.allFinite()) {
      throw DivergenceError("solve_linearized: non-finite iterate at rho=" + std::to_string(rho) +
                            ", inner step " + std::to_string(t));
    }
  }

  if (!full_batch) return params;
  double obj = linearized_objective(params, lin, data, cfg.objective);
  if (obj < best_obj) return params;
  return best;
}

// Subproblem objective scored on a fixed evaluation subset: the max-branch
// data term is scaled up to full-sample size; tail terms are exact.
struct TrialScorer {
  LabeledDataset subset;
  double weight = 1.0;

  static TrialScorer make(const LabeledDataset& data, int cap, std::uint64_t seed) {
    TrialScorer sc;
    Eigen::Index m = data.size();
    if (m <= cap) {
      sc.subset = data;
      sc.weight = 1.0;
      return sc;
    }
    Rng rng(seed);
    std::vector<int> idx = rng.sample_without_replacement(static_cast<int>(m), cap);
    sc.subset.features.resize(data.dim(), cap);
    sc.subset.labels.resize(cap);
    for (int i = 0; i < cap; ++i) {
      sc.subset.features.col(i) = data.features.col(idx[static_cast<std::size_t>(i)]);
      sc.subset.labels[i] = data.labels[idx[static_cast<std::size_t>(i)]];
    }
    sc.weight = static_cast<double>(m) / static_cast<double>(cap);
    return sc;
  }

  double score(const ModelParams& params, const LinearizationPoint& lin,
               const ObjectiveConfig& cfg) const {
    Vector plus, minus;
    detail::sign_split_sums(params, subset.features, cfg.beta, plus, minus);
    double data_term = 0;
    for (Eigen::Index i = 0; i < subset.size(); ++i) {
      double same = subset.labels[i] > 0 ? plus[i] : minus[i];
      double diff = subset.labels[i] > 0 ? minus[i] : plus[i];
      data_term += std::max(same, 1.0 + diff);
    }
    return weight * data_term + 0.5 * cfg.nu * params.v.squaredNorm() -
           params.U.cwiseProduct(lin.A).sum() - params.v.dot(lin.b);
  }
};

inline int trial_iterations(const SolverConfig& cfg) { return std::max(1, cfg.inner_iters / 20); }

}  // namespace detail

//! One convex subproblem: T projected stochastic subgradient steps at base
//! stepsize rho from the given start. Throws DivergenceError on non-finite
//! iterates, naming the offending rho.
inline ModelParams solve_linearized(const ModelParams& start, const LinearizationPoint& lin,
                                    const LabeledDataset& data, const SolverConfig& cfg,
                                    double rho, std::uint64_t seed) {
  SolverConfig rcfg = cfg.resolved(data.size());
  rcfg.validate();
  start.validate(rcfg.objective.epsilon);
  data.validate();
  Rng rng(seed);
  return detail::run_inner(start, lin, data, rcfg, rho, 1, rcfg.inner_iters, rng);
}

struct StepsizeChoice {
  double rho = 0.0;
  ModelParams warm;  // iterate of the winning trial
};

//! Trial phase of the inner solver: each candidate stepsize runs the first
//! T/20 iterations from the same start with the same draw sequence; the one
//! with the lowest scored subproblem objective wins. Diverged candidates are
//! skipped; if all diverge, a DivergenceError is thrown.
inline StepsizeChoice select_stepsize(const ModelParams& start, const LinearizationPoint& lin,
                                      const LabeledDataset& data, const SolverConfig& cfg) {
  SolverConfig rcfg = cfg.resolved(data.size());
  rcfg.validate();
  start.validate(rcfg.objective.epsilon);
  data.validate();
  const int trial_t = detail::trial_iterations(rcfg);
  auto scorer = detail::TrialScorer::make(data, rcfg.eval_subsample,
                                          Rng::derive(rcfg.seed, 0xE0));
  StepsizeChoice choice;
  double best_score = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double rho : rcfg.rho_grid) {
    ModelParams cand;
    try {
      Rng rng(Rng::derive(rcfg.seed, 0xA0));  // identical draws per candidate
      cand = detail::run_inner(start, lin, data, rcfg, rho, 1, trial_t, rng);
    } catch (const DivergenceError&) {
      continue;
    }
    double score = scorer.score(cand, lin, rcfg.objective);
    if (!std::isfinite(score)) continue;
    if (score < best_score) {
      best_score = score;
      choice.rho = rho;
      choice.warm = cand;
      found = true;
    }
  }
  if (!found) throw DivergenceError("select_stepsize: every candidate stepsize diverged");
  return choice;
}

struct SignSpec {
  SignPolicy policy = SignPolicy::proportional;
  double positive_fraction = -1.0;  // < 0: use the training-set class share
};

namespace detail {

// Atom j is initialized from a random training sample of class s_j.
inline Matrix init_atoms(const LabeledDataset& data, const IntVector& s, Rng& rng) {
  std::vector<int> pos, neg;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    (data.labels[i] > 0 ? pos : neg).push_back(static_cast<int>(i));
  }
  int need_pos = 0, need_neg = 0;
  for (Eigen::Index j = 0; j < s.size(); ++j) (s[j] > 0 ? need_pos : need_neg)++;
  if ((need_pos > 0 && pos.empty()) || (need_neg > 0 && neg.empty())) {
    throw std::invalid_argument("train_last: a sign block has no samples of its class");
  }
  auto draw_list = [&](const std::vector<int>& from, int count) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count));
    int available = static_cast<int>(from.size());
    if (count <= available) {
      for (int k : rng.sample_without_replacement(available, count)) out.push_back(from[static_cast<std::size_t>(k)]);
    } else {
      for (int i = 0; i < count; ++i) out.push_back(from[static_cast<std::size_t>(rng.below_int(available))]);
    }
    return out;
  };
  std::vector<int> pos_draws = draw_list(pos, need_pos);
  std::vector<int> neg_draws = draw_list(neg, need_neg);
  Matrix U(data.dim(), s.size());
  std::size_t pi = 0, ni = 0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    int idx = s[j] > 0 ? pos_draws[pi++] : neg_draws[ni++];
    U.col(j) = data.features.col(idx);
  }
  return U;
}

}  // namespace detail

//! Full training loop: repeated linearization of the concave side plus a
//! stochastic convex subproblem solve. The stepsize is selected during the
//! first subproblem's opening iterations and reused afterwards. Stops when
//! the parameter-change metric falls to delta or after max_outer steps.
inline std::pair<DictionaryModel, TrainReport> train_last(const LabeledDataset& data, int atoms,
                                                          const SolverConfig& cfg,
                                                          const SignSpec& sign = {}) {
  data.validate();
  cfg.validate();
  if (atoms < 2) throw std::invalid_argument("train_last: need at least two atoms");
  SolverConfig rcfg = cfg.resolved(data.size());

  double fraction = sign.positive_fraction;
  if (fraction < 0) {
    fraction = static_cast<double>((data.labels.array() == 1).count()) /
               static_cast<double>(data.size());
  }
  IntVector s = make_sign_vector(atoms, sign.policy, fraction);

  Rng init_rng(Rng::derive(rcfg.seed, 0x01));
  ModelParams params;
  params.U = detail::init_atoms(data, s, init_rng);
  params.v = Vector::Ones(atoms);
  params.s = s;

  TrainReport report;
  report.objective_trace.push_back(objective_relaxed(params, data, rcfg.objective));

  const int T = rcfg.inner_iters;
  const int trial_t = detail::trial_iterations(rcfg);
  const bool full_batch = rcfg.batch_size >= data.size();
  double rho = 0;

  for (int k = 0; k < rcfg.max_outer; ++k) {
    LinearizationPoint lin = grad_h(params, data, rcfg.objective);
    auto started = std::chrono::steady_clock::now();
    ModelParams next;
    if (k == 0) {
      SolverConfig trial_cfg = rcfg;
      StepsizeChoice choice = select_stepsize(params, lin, data, trial_cfg);
      rho = choice.rho;
      report.chosen_rho = rho;
      Rng rng(Rng::derive(rcfg.seed, 0x100));
      next = detail::run_inner(choice.warm, lin, data, rcfg, rho, trial_t + 1, T, rng,
                               full_batch ? &params : nullptr);
    } else {
      Rng rng(Rng::derive(rcfg.seed, 0x100 + static_cast<std::uint64_t>(k)));
      next = detail::run_inner(params, lin, data, rcfg, rho, 1, T, rng);
    }
    report.inner_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    report.objective_trace.push_back(objective_relaxed(next, data, rcfg.objective));
    double metric = termination_metric(params, next);
    params = std::move(next);
    if (metric <= rcfg.delta) {
      report.termination = TerminationCause::converged;
      break;
    }
  }

  report.final_params = params;
  return {to_dictionary_form(params), std::move(report)};
}

}  // namespace last

#endif  // LAST_SOLVER_HPP_
