#include "last/solver.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "last/data_io.hpp"
#include "last/model.hpp"
#include "last/objective.hpp"
#include "last/rng.hpp"
#include "last/types.hpp"
#include "test_util.hpp"

namespace last {
namespace {

using testutil::random_dataset;
using testutil::random_params;

double training_error(const DictionaryModel& model, const LabeledDataset& data) {
  int wrong = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (predict_label(predict_score(model, data.features.col(i))) != data.labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

TEST(SolverConfig, ValidateRejectsBadValues) {
  SolverConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.max_outer = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.max_outer = 50;
  cfg.rho_grid = {0.1, -0.5};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.rho_grid = {};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.rho_grid = {0.1};
  cfg.eval_subsample = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(SolverConfig, ResolvedAppliesBatchRules) {
  SolverConfig cfg;
  SolverConfig small = cfg.resolved(100);
  EXPECT_EQ(small.batch_size, 100);
  EXPECT_EQ(small.inner_iters, 1000);
  SolverConfig large = cfg.resolved(6000);
  EXPECT_EQ(large.batch_size, 200);
  EXPECT_EQ(large.inner_iters, 5000);

  cfg.batch_size = 32;
  cfg.inner_iters = 77;
  SolverConfig manual = cfg.resolved(6000);
  EXPECT_EQ(manual.batch_size, 32);
  EXPECT_EQ(manual.inner_iters, 77);
}

TEST(RhoSchedule, ConstantThenDecaying) {
  const double rho = 0.25;
  const double t0 = 100.0;
  for (int t = 1; t <= 100; ++t) EXPECT_DOUBLE_EQ(rho_schedule(t, rho, t0), rho);
  EXPECT_NEAR(rho_schedule(200, rho, t0), rho / 2.0, 1e-15);
  EXPECT_NEAR(rho_schedule(1000, rho, t0), rho / 10.0, 1e-15);
}

TEST(TerminationMetric, HandValues) {
  Rng rng(401);
  ModelParams a = random_params(rng, 3, 4);
  ModelParams b = a;
  EXPECT_DOUBLE_EQ(termination_metric(a, b), 0.0);

  // Entry moving off zero counts its absolute change.
  a.U(0, 0) = 0.0;
  b = a;
  b.U(0, 0) = 1e-3;
  EXPECT_DOUBLE_EQ(termination_metric(a, b), 1e-3);

  // A large entry counts the smaller relative change.
  a = random_params(rng, 2, 2);
  a.U.setConstant(2.0);
  a.v.setConstant(2.0);
  b = a;
  b.U(1, 1) = 2.0 + 4e-4;
  EXPECT_NEAR(termination_metric(a, b), 2e-4, 1e-12);
}

TEST(SolveLinearized, ImprovesSubproblemObjective) {
  Rng rng(402);
  LabeledDataset data = random_dataset(rng, 4, 30);
  ModelParams start;
  start.U = Matrix::Zero(4, 6);
  start.v = Vector::Ones(6);
  start.s.resize(6);
  start.s << 1, 1, 1, -1, -1, -1;
  SolverConfig cfg;
  cfg.inner_iters = 200;
  LinearizationPoint lin = grad_h(start, data, cfg.objective);

  ModelParams out = solve_linearized(start, lin, data, cfg, 0.01, 7);
  const double before = linearized_objective(start, lin, data, cfg.objective);
  const double after = linearized_objective(out, lin, data, cfg.objective);
  EXPECT_LE(after, before);
  EXPECT_GT(before - after, 1e-6);
  EXPECT_TRUE((out.v.array() >= cfg.objective.epsilon).all());
}

TEST(SolveLinearized, FullBatchNeverReturnsWorseThanStart) {
  // Even with a terrible stepsize, the best-iterate rule protects the start.
  Rng rng(403);
  LabeledDataset data = random_dataset(rng, 3, 20);
  ModelParams start = random_params(rng, 3, 4);
  SolverConfig cfg;
  cfg.inner_iters = 50;
  LinearizationPoint lin = grad_h(start, data, cfg.objective);
  for (double rho : {1e3, 1.0, 1e-9}) {
    ModelParams out = solve_linearized(start, lin, data, cfg, rho, 11);
    EXPECT_LE(linearized_objective(out, lin, data, cfg.objective),
              linearized_objective(start, lin, data, cfg.objective) + 1e-12)
        << "rho=" << rho;
  }
}

TEST(SolveLinearized, ProjectionKeepsThresholdsFeasible) {
  Rng rng(404);
  LabeledDataset data = random_dataset(rng, 3, 10);
  ModelParams start = random_params(rng, 3, 4);
  SolverConfig cfg;
  cfg.inner_iters = 5;
  // A linearization point with a strongly negative b drives v downward hard;
  // every threshold must land exactly on the feasibility floor.
  LinearizationPoint lin;
  lin.A = Matrix::Zero(3, 4);
  lin.b = Vector::Constant(4, -1e5);
  ModelParams out = solve_linearized(start, lin, data, cfg, 0.1, 3);
  for (int j = 0; j < 4; ++j) EXPECT_EQ(out.v[j], cfg.objective.epsilon);
  EXPECT_TRUE(out.U.allFinite());
}

TEST(SolveLinearized, ThrowsOnDivergence) {
  Rng rng(405);
  LabeledDataset data = random_dataset(rng, 3, 10);
  data.features *= 1e160;
  ModelParams start = random_params(rng, 3, 4);
  SolverConfig cfg;
  cfg.inner_iters = 20;
  LinearizationPoint lin;
  lin.A = Matrix::Zero(3, 4);
  lin.b = Vector::Zero(4);
  try {
    solve_linearized(start, lin, data, cfg, 1e160, 5);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("rho"), std::string::npos);
  }
}

TEST(SelectStepsize, PicksTheBetterScoredCandidate) {
  Rng rng(406);
  LabeledDataset data = random_dataset(rng, 4, 40);
  ModelParams start = random_params(rng, 4, 6);
  SolverConfig cfg;
  cfg.inner_iters = 400;  // trial phase = 20 iterations
  cfg.seed = 21;
  LinearizationPoint lin = grad_h(start, data, cfg.objective);

  auto run_single = [&](double rho) {
    SolverConfig one = cfg;
    one.rho_grid = {rho};
    return select_stepsize(start, lin, data, one);
  };
  StepsizeChoice a = run_single(0.1);
  StepsizeChoice b = run_single(0.001);
  // With <= 2000 samples the trial scorer sees the full dataset, so its score
  // is exactly the subproblem objective.
  const double score_a = linearized_objective(a.warm, lin, data, cfg.objective);
  const double score_b = linearized_objective(b.warm, lin, data, cfg.objective);

  SolverConfig both = cfg;
  both.rho_grid = {0.1, 0.001};
  StepsizeChoice joint = select_stepsize(start, lin, data, both);
  const StepsizeChoice& expected = score_b < score_a ? b : a;
  EXPECT_EQ(joint.rho, expected.rho);
  EXPECT_EQ((joint.warm.U - expected.warm.U).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((joint.warm.v - expected.warm.v).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SelectStepsize, DeterministicAcrossCalls) {
  Rng rng(407);
  LabeledDataset data = random_dataset(rng, 3, 25);
  ModelParams start = random_params(rng, 3, 4);
  SolverConfig cfg;
  cfg.inner_iters = 100;
  cfg.seed = 99;
  LinearizationPoint lin = grad_h(start, data, cfg.objective);
  StepsizeChoice first = select_stepsize(start, lin, data, cfg);
  StepsizeChoice second = select_stepsize(start, lin, data, cfg);
  EXPECT_EQ(first.rho, second.rho);
  EXPECT_EQ((first.warm.U - second.warm.U).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SelectStepsize, ThrowsWhenEveryCandidateDiverges) {
  Rng rng(408);
  LabeledDataset data = random_dataset(rng, 3, 10);
  data.features *= 1e160;
  ModelParams start = random_params(rng, 3, 4);
  SolverConfig cfg;
  cfg.inner_iters = 40;
  cfg.rho_grid = {1e160, 1e200};
  LinearizationPoint lin;
  lin.A = Matrix::Zero(3, 4);
  lin.b = Vector::Zero(4);
  EXPECT_THROW(select_stepsize(start, lin, data, cfg), DivergenceError);
}

TEST(TrainLast, LearnsSeparableData) {
  LabeledDataset data = synth_generate(SynthKind::separable, 80, 0.1, 17);
  SolverConfig cfg;
  cfg.seed = 5;
  SignSpec sign;
  sign.policy = SignPolicy::balanced;
  auto [model, report] = train_last(data, 2, cfg, sign);
  EXPECT_EQ(training_error(model, data), 0.0);
  EXPECT_GE(report.objective_trace.size(), 2u);
  EXPECT_EQ(report.chosen_rho == 0.1 || report.chosen_rho == 0.01 ||
                report.chosen_rho == 0.001,
            true);
}

TEST(TrainLast, FullBatchTraceIsNonIncreasing) {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    LabeledDataset data = synth_generate(SynthKind::gaussians2, 60, 0.4, 100 + seed);
    SolverConfig cfg;
    cfg.seed = seed;
    cfg.max_outer = 8;
    cfg.inner_iters = 300;
    auto [model, report] = train_last(data, 4, cfg);
    for (std::size_t k = 1; k < report.objective_trace.size(); ++k) {
      EXPECT_LE(report.objective_trace[k], report.objective_trace[k - 1] + 1e-6)
          << "seed " << seed << " outer step " << k;
    }
  }
}

TEST(TrainLast, TraceAndTimersMatchOuterSteps) {
  LabeledDataset data = synth_generate(SynthKind::gaussians2, 40, 0.3, 9);
  SolverConfig cfg;
  cfg.max_outer = 1;
  cfg.inner_iters = 60;
  auto [model, report] = train_last(data, 4, cfg);
  EXPECT_EQ(report.objective_trace.size(), 2u);
  EXPECT_EQ(report.inner_seconds.size(), 1u);
  EXPECT_GT(report.inner_seconds[0], 0.0);
  EXPECT_EQ(report.termination, TerminationCause::max_iterations);
}

TEST(TrainLast, HugeDeltaConvergesImmediately) {
  LabeledDataset data = synth_generate(SynthKind::gaussians2, 40, 0.3, 10);
  SolverConfig cfg;
  cfg.delta = 1e9;
  cfg.inner_iters = 60;
  auto [model, report] = train_last(data, 4, cfg);
  EXPECT_EQ(report.termination, TerminationCause::converged);
  EXPECT_EQ(report.objective_trace.size(), 2u);
  EXPECT_STREQ(to_string(report.termination), "converged");
}

TEST(TrainLast, DeterministicForFixedSeed) {
  LabeledDataset data = synth_generate(SynthKind::xor4, 80, 0.15, 21);
  SolverConfig cfg;
  cfg.seed = 77;
  cfg.max_outer = 4;
  cfg.inner_iters = 200;
  auto [m1, r1] = train_last(data, 4, cfg);
  auto [m2, r2] = train_last(data, 4, cfg);
  ASSERT_EQ(r1.objective_trace.size(), r2.objective_trace.size());
  for (std::size_t k = 0; k < r1.objective_trace.size(); ++k) {
    EXPECT_EQ(r1.objective_trace[k], r2.objective_trace[k]);
  }
  EXPECT_EQ((m1.D - m2.D).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((m1.w - m2.w).cwiseAbs().maxCoeff(), 0.0);

  cfg.seed = 78;
  auto [m3, r3] = train_last(data, 4, cfg);
  EXPECT_GT((m1.D - m3.D).cwiseAbs().maxCoeff(), 0.0);
}

TEST(TrainLast, FinalParamsStayFeasible) {
  LabeledDataset data = synth_generate(SynthKind::xor4, 60, 0.2, 31);
  SolverConfig cfg;
  cfg.max_outer = 3;
  cfg.inner_iters = 150;
  auto [model, report] = train_last(data, 6, cfg);
  EXPECT_TRUE((report.final_params.v.array() >= cfg.objective.epsilon).all());
  int positives = 0;
  for (int j = 0; j < 6; ++j) positives += report.final_params.s[j] == 1 ? 1 : 0;
  EXPECT_GE(positives, 1);
  EXPECT_LE(positives, 5);
  // Dictionary weights carry the signs of the contiguous block.
  for (int j = 0; j < 6; ++j) {
    EXPECT_EQ(model.w[j] > 0 ? 1 : -1, report.final_params.s[j]);
  }
}

TEST(TrainLast, MinibatchModeRunsAndIsDeterministic) {
  LabeledDataset data = synth_generate(SynthKind::gaussians2, 100, 0.3, 41);
  SolverConfig cfg;
  cfg.batch_size = 16;
  cfg.inner_iters = 150;
  cfg.max_outer = 3;
  cfg.seed = 13;
  auto [m1, r1] = train_last(data, 4, cfg);
  auto [m2, r2] = train_last(data, 4, cfg);
  EXPECT_EQ((m1.D - m2.D).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE((r1.final_params.v.array() >= cfg.objective.epsilon).all());
}

TEST(TrainLast, RejectsDegenerateRequests) {
  LabeledDataset data = synth_generate(SynthKind::gaussians2, 30, 0.3, 51);
  SolverConfig cfg;
  EXPECT_THROW(train_last(data, 1, cfg), std::invalid_argument);

  LabeledDataset one_sided = data;
  one_sided.labels.setConstant(1);
  // Class share puts every atom in the positive block, which is rejected, and
  // an explicit split fails because the negative block has no samples.
  EXPECT_THROW(train_last(one_sided, 4, cfg), std::invalid_argument);
  SignSpec sign;
  sign.positive_fraction = 0.5;
  EXPECT_THROW(train_last(one_sided, 4, cfg, sign), std::invalid_argument);
}

}  // namespace
}  // namespace last
