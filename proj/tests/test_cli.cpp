#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"
#include "last/data_io.hpp"
#include "last/types.hpp"
#include "test_util.hpp"

namespace last {
namespace {

using nlohmann::json;
using testutil::TempFile;

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  TempFile log(".log");
  std::string command = env_prefix.empty() ? std::string(LAST_CLI_PATH)
                                           : env_prefix + " " + LAST_CLI_PATH;
  command += " " + args + " > " + log.path() + " 2>&1";
  int raw = std::system(command.c_str());
  CliResult result;
  result.exit_code = WEXITSTATUS(raw);
  std::ifstream in(log.path());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  result.output = buffer.str();
  return result;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

TEST(Cli, TrainEvalRoundTrip) {
  TempFile model(".json");
  TempFile report(".json");
  CliResult train = run_cli(
      "train --synth gaussians2 --synth-m 150 --synth-noise 0.3 --dict-size 4 "
      "--outer-iters 5 --seed 11 --out " + model.path() + " --report " + report.path());
  ASSERT_EQ(train.exit_code, 0) << train.output;
  EXPECT_NE(train.output.find("loaded 150 samples"), std::string::npos);

  json stored = json::parse(read_file(model.path()));
  EXPECT_EQ(stored.at("version"), 1);
  EXPECT_EQ(stored.at("kind"), "binary");
  EXPECT_EQ(stored.at("N"), 4);
  EXPECT_EQ(stored.at("classes").size(), 1u);

  json r = json::parse(read_file(report.path()));
  EXPECT_EQ(r.at("method"), "last");
  EXPECT_EQ(r.at("samples"), 150);
  ASSERT_EQ(r.at("members").size(), 1u);
  auto trace = r.at("members")[0].at("objective_trace").get<std::vector<double>>();
  ASSERT_GE(trace.size(), 2u);
  EXPECT_LE(trace.back(), trace.front());  // full-batch runs never move uphill
  EXPECT_LE(r.at("train_error").get<double>(), 0.2);

  CliResult eval = run_cli("eval --model " + model.path() +
                           " --synth gaussians2 --synth-m 200 --synth-noise 0.3 --seed 12 --json");
  ASSERT_EQ(eval.exit_code, 0) << eval.output;
  json e = json::parse(eval.output);
  EXPECT_EQ(e.at("samples"), 200);
  double err = e.at("error_rate").get<double>();
  EXPECT_GE(err, 0.0);
  EXPECT_LE(err, 0.2);
  EXPECT_EQ(e.at("per_class").size(), 2u);
}

TEST(Cli, SameSeedGivesIdenticalModels) {
  TempFile a(".json");
  TempFile b(".json");
  TempFile c(".json");
  const std::string common =
      "train --synth xor4 --synth-m 80 --synth-noise 0.15 --dict-size 4 --outer-iters 3 --out ";
  ASSERT_EQ(run_cli(common + a.path() + " --seed 5").exit_code, 0);
  ASSERT_EQ(run_cli(common + b.path() + " --seed 5").exit_code, 0);
  ASSERT_EQ(run_cli(common + c.path() + " --seed 6").exit_code, 0);
  EXPECT_EQ(read_file(a.path()), read_file(b.path()));
  EXPECT_NE(read_file(a.path()), read_file(c.path()));
}

TEST(Cli, SeedFallsBackToEnvironment) {
  TempFile flagged(".json");
  TempFile env(".json");
  const std::string common =
      "train --synth gaussians2 --synth-m 60 --synth-noise 0.2 --dict-size 2 --outer-iters 2 --out ";
  ASSERT_EQ(run_cli(common + flagged.path() + " --seed 42").exit_code, 0);
  ASSERT_EQ(run_cli(common + env.path(), "LAST_SEED=42").exit_code, 0);
  EXPECT_EQ(read_file(flagged.path()), read_file(env.path()));
}

TEST(Cli, ExitCodesFollowTheContract) {
  EXPECT_EQ(run_cli("--help").exit_code, 0);
  EXPECT_EQ(run_cli("train --synth xor4").exit_code, 2);         // --out missing
  EXPECT_EQ(run_cli("train --out /tmp/x.json").exit_code, 2);    // no data source
  EXPECT_EQ(run_cli("frobnicate").exit_code, 2);                 // unknown subcommand
  EXPECT_EQ(run_cli("eval --model /nonexistent.json --synth xor4").exit_code, 2);

  // Runtime failure: model dimension does not match the dataset.
  TempFile model(".json");
  ASSERT_EQ(run_cli("train --synth xor4 --synth-m 40 --synth-noise 0.1 --dict-size 2 "
                    "--outer-iters 2 --seed 1 --out " + model.path()).exit_code, 0);
  TempFile csv(".csv");
  std::ofstream(csv.path()) << "1,2,3,1\n4,5,6,0\n";
  CliResult mismatch = run_cli("eval --model " + model.path() + " --csv " + csv.path());
  EXPECT_EQ(mismatch.exit_code, 1);
  EXPECT_NE(mismatch.output.find("error:"), std::string::npos);
}

TEST(Cli, EncodeMatchesTheOneStepIdentity) {
  TempFile dict(".csv");
  std::ofstream(dict.path()) << "1,0\n0,1\n";
  TempFile points(".csv");
  std::ofstream(points.path()) << "x,y,l\n2,0,1\n0,3,0\n0.25,0.5,1\n";

  TempFile soft(".csv");
  ASSERT_EQ(run_cli("encode --dict-csv " + dict.path() + " --csv " + points.path() +
                    " --encoder softthresh --alpha 1 --out " + soft.path()).exit_code, 0);
  TempFile ista(".csv");
  ASSERT_EQ(run_cli("encode --dict-csv " + dict.path() + " --csv " + points.path() +
                    " --encoder ista-nn --lambda 1 --ista-iters 1 --ista-step 1 --out " +
                    ista.path()).exit_code, 0);

  EXPECT_EQ(read_file(soft.path()), "1,0\n0,2\n0,0\n");
  EXPECT_EQ(read_file(ista.path()), read_file(soft.path()));
}

TEST(Cli, MulticlassTrainingFromClassIds) {
  TempFile csv(".csv");
  {
    Rng rng(77);
    std::ofstream out(csv.path());
    for (int i = 0; i < 90; ++i) {
      int cls = i % 3;
      double x[3];
      for (int d = 0; d < 3; ++d) x[d] = 0.3 * rng.normal() + (d == cls ? 2.0 : 0.0);
      out << x[0] << ',' << x[1] << ',' << x[2] << ',' << cls << '\n';
    }
  }
  TempFile model(".json");
  CliResult train = run_cli("train --csv " + csv.path() +
                            " --dict-size 3 --outer-iters 4 --seed 2 --out " + model.path());
  ASSERT_EQ(train.exit_code, 0) << train.output;

  json stored = json::parse(read_file(model.path()));
  EXPECT_EQ(stored.at("kind"), "multiclass");
  ASSERT_EQ(stored.at("classes").size(), 3u);
  EXPECT_EQ(stored.at("classes")[0].at("label"), 0);
  EXPECT_EQ(stored.at("classes")[2].at("label"), 2);

  CliResult eval = run_cli("eval --model " + model.path() + " --csv " + csv.path() + " --json");
  ASSERT_EQ(eval.exit_code, 0) << eval.output;
  json e = json::parse(eval.output);
  EXPECT_LE(e.at("error_rate").get<double>(), 0.2);
  EXPECT_EQ(e.at("per_class").size(), 3u);
}

TEST(Cli, SgdMethodTrainsAndRecordsIt) {
  TempFile model(".json");
  TempFile report(".json");
  CliResult train = run_cli(
      "train --method sgd --synth separable --synth-m 100 --synth-noise 0.2 --dict-size 4 "
      "--sgd-iters 2000 --sgd-step-grid 0.1 0.01 --seed 3 --out " + model.path() +
      " --report " + report.path());
  ASSERT_EQ(train.exit_code, 0) << train.output;
  json r = json::parse(read_file(report.path()));
  EXPECT_EQ(r.at("method"), "sgd");
  EXPECT_LE(r.at("train_error").get<double>(), 0.1);
}

TEST(Cli, BenchReportsEveryMethod) {
  TempFile model(".json");
  ASSERT_EQ(run_cli("train --synth gaussians2 --synth-m 80 --synth-noise 0.2 --dict-size 3 "
                    "--outer-iters 2 --seed 4 --out " + model.path()).exit_code, 0);
  CliResult bench = run_cli("bench --model " + model.path() +
                            " --synth gaussians2 --synth-m 200 --synth-noise 0.2 --seed 5 "
                            "--repeats 3 --ista-iters 20 --json");
  ASSERT_EQ(bench.exit_code, 0) << bench.output;
  json rows = json::parse(bench.output);
  ASSERT_EQ(rows.size(), 4u);
  std::vector<std::string> methods;
  for (const auto& row : rows) {
    methods.push_back(row.at("method"));
    EXPECT_GE(row.at("seconds_total").get<double>(), 0.0);
    EXPECT_GE(row.at("seconds_per_sample").get<double>(), 0.0);
    EXPECT_EQ(row.at("repeat_seconds").size(), 3u);
  }
  EXPECT_EQ(methods, (std::vector<std::string>{"last", "linear", "ista+linear", "nn"}));
}

TEST(Cli, ConfigFileFillsInOptions) {
  TempFile config(".ini");
  std::ofstream(config.path()) << "[train]\n"
                               << "dict-size=3\n"
                               << "outer-iters=2\n"
                               << "synth=\"gaussians2\"\n"
                               << "synth-m=50\n"
                               << "synth-noise=0.1\n";
  TempFile model(".json");
  CliResult train = run_cli("--config " + config.path() + " train --seed 1 --out " + model.path());
  ASSERT_EQ(train.exit_code, 0) << train.output;
  json stored = json::parse(read_file(model.path()));
  EXPECT_EQ(stored.at("N"), 3);
}

}  // namespace
}  // namespace last
