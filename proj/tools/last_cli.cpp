// Command line front end: train, eval, encode, and bench subcommands over
// the library. Exit codes: 0 on success, 1 on runtime failure, 2 on usage
// errors.

#include <chrono>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "last/last.hpp"

namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Shared data-source options

struct DataOptions {
  std::string csv;
  int label_col = -1;
  std::string idx_images;
  std::string idx_labels;
  std::string synth_kind;
  int synth_m = 1000;
  double synth_noise = 0.1;
  int limit = 0;
  bool normalize = false;
};

void add_data_options(CLI::App* cmd, DataOptions& opts) {
  auto* csv = cmd->add_option("--csv", opts.csv, "CSV dataset, one sample per row")
                  ->check(CLI::ExistingFile);
  cmd->add_option("--label-col", opts.label_col, "label column index, -1 means last")
      ->needs(csv)
      ->capture_default_str();
  auto* images = cmd->add_option("--idx-images", opts.idx_images, "IDX image file")
                     ->check(CLI::ExistingFile);
  auto* labels = cmd->add_option("--idx-labels", opts.idx_labels, "IDX label file")
                     ->check(CLI::ExistingFile);
  images->needs(labels);
  labels->needs(images);
  auto* synth = cmd->add_option("--synth", opts.synth_kind, "synthetic dataset kind")
                    ->check(CLI::IsMember({"xor4", "gaussians2", "separable"}));
  cmd->add_option("--synth-m", opts.synth_m, "synthetic sample count")
      ->needs(synth)
      ->capture_default_str();
  cmd->add_option("--synth-noise", opts.synth_noise, "synthetic noise level")
      ->needs(synth)
      ->capture_default_str();
  csv->excludes(images)->excludes(synth);
  images->excludes(synth);
  cmd->add_option("--limit", opts.limit, "keep only the first N samples");
  cmd->add_flag("--preprocess", opts.normalize, "zero-mean and unit-normalize each sample");
}

last::SynthKind parse_synth_kind(const std::string& name) {
  if (name == "xor4") return last::SynthKind::xor4;
  if (name == "gaussians2") return last::SynthKind::gaussians2;
  return last::SynthKind::separable;
}

last::LabeledDataset load_data(const DataOptions& opts, std::uint64_t seed) {
  last::LabeledDataset data;
  if (!opts.csv.empty()) {
    data = last::load_csv(opts.csv, opts.label_col);
  } else if (!opts.idx_images.empty()) {
    data = last::load_idx(opts.idx_images, opts.idx_labels);
  } else if (!opts.synth_kind.empty()) {
    data = last::synth_generate(parse_synth_kind(opts.synth_kind), opts.synth_m,
                                opts.synth_noise, last::Rng::derive(seed, 0xDA7A));
  } else {
    throw UsageError("no data source given; pass --csv, --idx-images/--idx-labels, or --synth");
  }
  if (opts.limit > 0 && opts.limit < data.size()) data = last::head_samples(data, opts.limit);
  if (opts.normalize) data = last::preprocess(data);
  return data;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  DataOptions data;
  std::string method = "last";
  int dict_size = 50;
  std::string out;
  std::string report_path;
  std::uint64_t seed = 0;
  std::string preset;

  double nu = 1.0;
  double beta = 100.0;
  double epsilon = 1e-4;
  double delta = 1e-4;
  int outer_iters = 50;
  int inner_iters = 0;
  int batch_size = 0;
  std::vector<double> rho_grid{0.1, 0.01, 0.001};
  int eval_subsample = 2000;

  std::string sign_policy = "proportional";
  double positive_fraction = -1.0;

  long long sgd_iters = 250000;
  int sgd_minibatch = 10;
  std::vector<double> sgd_step_grid{0.1, 0.01, 0.001, 0.0001};
  double sgd_validation_fraction = 0.10;
};

last::SolverConfig solver_config(const TrainOptions& opts, std::uint64_t seed) {
  last::SolverConfig cfg;
  cfg.objective.nu = opts.nu;
  cfg.objective.beta = opts.beta;
  cfg.objective.epsilon = opts.epsilon;
  cfg.delta = opts.delta;
  cfg.max_outer = opts.outer_iters;
  cfg.inner_iters = opts.inner_iters;
  cfg.batch_size = opts.batch_size;
  cfg.rho_grid = opts.rho_grid;
  cfg.eval_subsample = opts.eval_subsample;
  cfg.seed = seed;
  return cfg;
}

last::SgdConfig sgd_config(const TrainOptions& opts, std::uint64_t seed) {
  last::SgdConfig cfg;
  cfg.iterations = opts.sgd_iters;
  cfg.minibatch = opts.sgd_minibatch;
  cfg.step_grid = opts.sgd_step_grid;
  cfg.validation_fraction = opts.sgd_validation_fraction;
  cfg.nu = opts.nu;
  cfg.beta = opts.beta;
  cfg.seed = seed;
  return cfg;
}

last::SignSpec sign_spec(const TrainOptions& opts) {
  last::SignSpec spec;
  spec.policy = opts.sign_policy == "balanced" ? last::SignPolicy::balanced
                                               : last::SignPolicy::proportional;
  spec.positive_fraction = opts.positive_fraction;
  return spec;
}

std::pair<last::DictionaryModel, last::TrainReport> train_one(
    const TrainOptions& opts, const last::LabeledDataset& data, std::uint64_t seed) {
  if (opts.method == "sgd") return last::train_sgd(data, opts.dict_size, sgd_config(opts, seed));
  return last::train_last(data, opts.dict_size, solver_config(opts, seed), sign_spec(opts));
}

json member_report(int class_id, const last::TrainReport& report) {
  double inner_total = 0;
  for (double s : report.inner_seconds) inner_total += s;
  return json{{"class", class_id},
              {"objective_trace", report.objective_trace},
              {"chosen_rho", report.chosen_rho},
              {"termination", last::to_string(report.termination)},
              {"inner_seconds_total", inner_total}};
}

void print_member_line(int class_id, const last::TrainReport& report) {
  const auto& trace = report.objective_trace;
  std::cout << "class " << class_id << ": objective " << trace.front() << " -> " << trace.back()
            << ", rho " << report.chosen_rho << ", " << last::to_string(report.termination)
            << " after " << trace.size() - 1 << " outer steps\n";
}

int run_train(TrainOptions& opts) {
  auto started = std::chrono::steady_clock::now();
  last::LabeledDataset data = load_data(opts.data, opts.seed);
  std::cout << "loaded " << data.size() << " samples of dimension " << data.dim() << "\n";

  std::vector<int> classes = data.distinct_classes();
  const bool multiclass = classes.size() > 2;

  last::StoredModel stored;
  json members = json::array();
  if (multiclass) {
    stored.kind = last::StoredModel::Kind::multiclass;
    for (int cls : classes) {
      last::LabeledDataset view = data;
      for (Eigen::Index i = 0; i < view.size(); ++i) {
        view.labels[i] = view.class_ids[static_cast<std::size_t>(i)] == cls ? 1 : -1;
      }
      auto [model, report] = train_one(opts, view, opts.seed + static_cast<std::uint64_t>(cls));
      stored.model.models.push_back(model);
      stored.model.labels.push_back(cls);
      print_member_line(cls, report);
      members.push_back(member_report(cls, report));
    }
  } else {
    stored.kind = last::StoredModel::Kind::binary;
    auto [model, report] = train_one(opts, data, opts.seed);
    int positive_id = 1;
    if (classes.size() == 2) positive_id = std::max(classes[0], classes[1]);
    stored.model.models = {model};
    stored.model.labels = {positive_id};
    print_member_line(positive_id, report);
    members.push_back(member_report(positive_id, report));
  }

  last::EvalReport train_eval = last::evaluate(stored, data);
  double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  last::save_model(stored, opts.out);
  std::cout << "training error " << train_eval.error_rate << ", feature sparsity "
            << train_eval.feature_sparsity << "\n"
            << "wrote " << opts.out << " (" << seconds << " s)\n";

  if (!opts.report_path.empty()) {
    json report{{"method", opts.method},
                {"atoms", opts.dict_size},
                {"samples", data.size()},
                {"dim", data.dim()},
                {"seed", opts.seed},
                {"members", members},
                {"train_error", train_eval.error_rate},
                {"feature_sparsity", train_eval.feature_sparsity},
                {"wall_seconds", seconds}};
    std::ofstream out(opts.report_path);
    if (!out) throw std::runtime_error("cannot open " + opts.report_path + " for writing");
    out << report.dump(2) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  DataOptions data;
  std::string model_path;
  std::string out;
  bool as_json = false;
  std::uint64_t seed = 0;
};

json eval_to_json(const last::EvalReport& report, Eigen::Index samples) {
  json per_class = json::object();
  for (const auto& [cls, err] : report.per_class_error) {
    per_class[std::to_string(cls)] = {{"error", err}, {"count", report.per_class_count.at(cls)}};
  }
  return json{{"samples", samples},
              {"error_rate", report.error_rate},
              {"feature_sparsity", report.feature_sparsity},
              {"predict_seconds", report.predict_seconds},
              {"per_class", per_class}};
}

int run_eval(EvalOptions& opts) {
  last::StoredModel stored = last::load_model(opts.model_path);
  last::LabeledDataset data = load_data(opts.data, opts.seed);
  last::EvalReport report = last::evaluate(stored, data);

  if (opts.as_json || !opts.out.empty()) {
    json j = eval_to_json(report, data.size());
    if (!opts.out.empty()) {
      std::ofstream out(opts.out);
      if (!out) throw std::runtime_error("cannot open " + opts.out + " for writing");
      out << j.dump(2) << '\n';
      std::cout << "wrote " << opts.out << "\n";
    } else {
      std::cout << j.dump(2) << "\n";
    }
    return 0;
  }

  std::cout << "samples " << data.size() << "\n"
            << "error rate " << report.error_rate << "\n"
            << "feature sparsity " << report.feature_sparsity << "\n"
            << "predict seconds " << report.predict_seconds << "\n";
  for (const auto& [cls, err] : report.per_class_error) {
    std::cout << "class " << cls << ": error " << err << " over "
              << report.per_class_count.at(cls) << " samples\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// encode

struct EncodeOptions {
  DataOptions data;
  std::string model_path;
  std::string dict_csv;
  std::string encoder = "softthresh";
  double alpha = -1.0;  // < 0: use the model threshold, or 1.0 from a raw dictionary
  double lambda = 0.1;
  int ista_iters = 1000;
  double ista_step = 0.0;
  double ista_tol = 1e-8;
  std::string out;
  std::uint64_t seed = 0;
};

last::Matrix read_dictionary_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) {
      row.push_back(std::stod(cell));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw last::ParseError(path + ": ragged dictionary row at line " +
                             std::to_string(rows.size() + 1));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw last::ParseError(path + ": empty dictionary");
  // One atom per row: transpose into columns.
  last::Matrix D(static_cast<Eigen::Index>(rows.front().size()),
                 static_cast<Eigen::Index>(rows.size()));
  for (Eigen::Index j = 0; j < D.cols(); ++j) {
    for (Eigen::Index r = 0; r < D.rows(); ++r) {
      D(r, j) = rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)];
    }
  }
  return D;
}

int run_encode(EncodeOptions& opts) {
  last::Matrix D;
  double default_alpha = 1.0;
  if (!opts.model_path.empty()) {
    last::StoredModel stored = last::load_model(opts.model_path);
    D = stored.model.models.front().D;
    default_alpha = stored.model.models.front().alpha;
  } else if (!opts.dict_csv.empty()) {
    D = read_dictionary_csv(opts.dict_csv);
  } else {
    throw UsageError("encode needs --model or --dict-csv");
  }

  last::LabeledDataset data = load_data(opts.data, opts.seed);
  if (data.dim() != D.rows()) {
    throw std::runtime_error("encode: dictionary dimension " + std::to_string(D.rows()) +
                             " does not match data dimension " + std::to_string(data.dim()));
  }

  last::Matrix codes;
  if (opts.encoder == "softthresh") {
    double alpha = opts.alpha >= 0 ? opts.alpha : default_alpha;
    codes = ((D.transpose() * data.features).array() - alpha).cwiseMax(0.0).matrix();
  } else {
    last::EncoderConfig cfg;
    cfg.lambda = opts.lambda;
    cfg.step = opts.ista_step;
    cfg.max_iters = opts.ista_iters;
    cfg.tol = opts.ista_tol;
    cfg.nonneg = opts.encoder == "ista-nn";
    codes = last::nnsc_encode_all(D, data.features, cfg);
  }
  last::write_features_csv(opts.out, codes);
  std::cout << "wrote " << codes.cols() << " encodings of size " << codes.rows() << " to "
            << opts.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOptions {
  DataOptions data;
  std::string model_path;
  int repeats = 5;
  double lambda = 0.1;
  int ista_iters = 100;
  bool as_json = false;
  std::uint64_t seed = 0;
};

int run_bench(BenchOptions& opts) {
  last::StoredModel stored = last::load_model(opts.model_path);
  last::LabeledDataset data = load_data(opts.data, opts.seed);
  const last::DictionaryModel& member = stored.model.models.front();
  if (member.dim() != data.dim()) throw std::runtime_error("bench: dimension mismatch");
  const last::Matrix& X = data.features;

  json rows = json::array();
  auto add_row = [&](const std::string& method, const last::BenchResult& r) {
    rows.push_back(json{{"method", method},
                        {"seconds_total", r.seconds_total},
                        {"seconds_per_sample", r.seconds_per_sample},
                        {"repeat_seconds", r.repeat_seconds}});
  };

  if (stored.kind == last::StoredModel::Kind::binary) {
    add_row("last", last::benchmark_predict(member, data, opts.repeats));
  } else {
    add_row("last", last::benchmark_predict(stored.model, data, opts.repeats));
  }

  last::Vector w_linear = member.D * member.w;
  add_row("linear", last::detail::run_benchmark(data.size(), opts.repeats, [&] {
            return (w_linear.transpose() * X).sum();
          }));

  last::EncoderConfig enc;
  enc.lambda = opts.lambda;
  enc.max_iters = opts.ista_iters;
  enc.nonneg = true;
  add_row("ista+linear", last::detail::run_benchmark(data.size(), opts.repeats, [&] {
            last::Matrix codes = last::nnsc_encode_all(member.D, X, enc);
            return (member.w.transpose() * codes).sum();
          }));

  last::IntVector atom_labels(member.w.size());
  for (Eigen::Index j = 0; j < member.w.size(); ++j) {
    atom_labels[j] = last::predict_label(member.w[j]);
  }
  add_row("nn", last::detail::run_benchmark(data.size(), opts.repeats, [&] {
            double checksum = 0;
            for (Eigen::Index i = 0; i < X.cols(); ++i) {
              checksum += last::nn_classify(member.D, atom_labels, X.col(i));
            }
            return checksum;
          }));

  if (opts.as_json) {
    std::cout << rows.dump(2) << "\n";
    return 0;
  }
  std::cout << "method        total-s        per-sample-s\n";
  for (const auto& row : rows) {
    std::ostringstream line;
    line.setf(std::ios::left);
    line.width(14);
    line << row["method"].get<std::string>();
    line << row["seconds_total"].get<double>() << "   "
         << row["seconds_per_sample"].get<double>();
    std::cout << line.str() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

void apply_preset(TrainOptions& opts, const CLI::App* train, const CLI::Option* preset) {
  if (preset->count() == 0) return;
  auto unset = [&](const std::string& name) {
    return train->get_option(name)->count() == 0;
  };
  if (opts.preset == "usps") {
    if (unset("--dict-size")) opts.dict_size = 200;
    if (unset("--preprocess")) opts.data.normalize = true;
  } else if (opts.preset == "mnist-10k") {
    if (unset("--dict-size")) opts.dict_size = 100;
    if (unset("--limit")) opts.data.limit = 10000;
    if (unset("--preprocess")) opts.data.normalize = true;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soft-thresholding classifiers with jointly learned dictionaries"};
  app.set_version_flag("--version", "last 0.1.0");
  app.set_config("--config", "", "read options from an INI file");
  app.require_subcommand(1);

  TrainOptions train_opts;
  auto* train = app.add_subcommand("train", "fit a model and write it as JSON");
  add_data_options(train, train_opts.data);
  train->add_option("--method", train_opts.method, "training method")
      ->check(CLI::IsMember({"last", "sgd"}))
      ->capture_default_str();
  train->add_option("--dict-size", train_opts.dict_size, "number of atoms")
      ->capture_default_str();
  train->add_option("--out", train_opts.out, "output model path")->required();
  train->add_option("--report", train_opts.report_path, "write a JSON training report here");
  train->add_option("--seed", train_opts.seed, "random seed")->envname("LAST_SEED");
  auto* preset = train->add_option("--preset", train_opts.preset, "named experiment settings")
                     ->check(CLI::IsMember({"usps", "mnist-10k"}));
  train->add_option("--nu", train_opts.nu, "weight-decay strength")->capture_default_str();
  train->add_option("--beta", train_opts.beta, "soft-plus sharpness")->capture_default_str();
  train->add_option("--epsilon", train_opts.epsilon, "threshold feasibility floor")
      ->capture_default_str();
  train->add_option("--delta", train_opts.delta, "outer termination threshold")
      ->capture_default_str();
  train->add_option("--outer-iters", train_opts.outer_iters, "maximum outer steps")
      ->capture_default_str();
  train->add_option("--inner-iters", train_opts.inner_iters,
                    "subgradient steps per subproblem, 0 = auto");
  train->add_option("--batch-size", train_opts.batch_size, "subgradient minibatch, 0 = auto");
  train->add_option("--rho-grid", train_opts.rho_grid, "candidate stepsizes");
  train->add_option("--eval-subsample", train_opts.eval_subsample,
                    "sample cap when scoring stepsize trials");
  train->add_option("--sign-policy", train_opts.sign_policy, "atom sign layout")
      ->check(CLI::IsMember({"proportional", "balanced"}))
      ->capture_default_str();
  train->add_option("--positive-fraction", train_opts.positive_fraction,
                    "fraction of positive atoms, < 0 = class share");
  train->add_option("--sgd-iters", train_opts.sgd_iters, "SGD iteration budget")
      ->capture_default_str();
  train->add_option("--sgd-minibatch", train_opts.sgd_minibatch, "SGD minibatch size")
      ->capture_default_str();
  train->add_option("--sgd-step-grid", train_opts.sgd_step_grid, "SGD candidate stepsizes");
  train->add_option("--sgd-validation-fraction", train_opts.sgd_validation_fraction,
                    "held-out share for SGD stepsize selection")
      ->capture_default_str();

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "evaluate a model on a dataset");
  add_data_options(eval, eval_opts.data);
  eval->add_option("--model", eval_opts.model_path, "model JSON path")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out", eval_opts.out, "write the JSON report here");
  eval->add_flag("--json", eval_opts.as_json, "print the report as JSON");
  eval->add_option("--seed", eval_opts.seed, "random seed")->envname("LAST_SEED");

  EncodeOptions encode_opts;
  auto* encode = app.add_subcommand("encode", "write feature encodings as CSV");
  add_data_options(encode, encode_opts.data);
  auto* enc_model = encode->add_option("--model", encode_opts.model_path, "model JSON path")
                        ->check(CLI::ExistingFile);
  encode->add_option("--dict-csv", encode_opts.dict_csv, "dictionary CSV, one atom per row")
      ->check(CLI::ExistingFile)
      ->excludes(enc_model);
  encode->add_option("--encoder", encode_opts.encoder, "encoding rule")
      ->check(CLI::IsMember({"softthresh", "ista-l1", "ista-nn"}))
      ->capture_default_str();
  encode->add_option("--alpha", encode_opts.alpha, "soft threshold, < 0 = model value");
  encode->add_option("--lambda", encode_opts.lambda, "sparse-coding penalty")
      ->capture_default_str();
  encode->add_option("--ista-iters", encode_opts.ista_iters, "proximal iteration budget")
      ->capture_default_str();
  encode->add_option("--ista-step", encode_opts.ista_step, "proximal stepsize, 0 = auto");
  encode->add_option("--ista-tol", encode_opts.ista_tol, "proximal stopping tolerance")
      ->capture_default_str();
  encode->add_option("--out", encode_opts.out, "output CSV path")->required();
  encode->add_option("--seed", encode_opts.seed, "random seed")->envname("LAST_SEED");

  BenchOptions bench_opts;
  auto* bench = app.add_subcommand("bench", "time prediction methods on a dataset");
  add_data_options(bench, bench_opts.data);
  bench->add_option("--model", bench_opts.model_path, "model JSON path")
      ->required()
      ->check(CLI::ExistingFile);
  bench->add_option("--repeats", bench_opts.repeats, "timing repeats")->capture_default_str();
  bench->add_option("--lambda", bench_opts.lambda, "sparse-coding penalty for the ISTA row")
      ->capture_default_str();
  bench->add_option("--ista-iters", bench_opts.ista_iters, "ISTA budget for the ISTA row")
      ->capture_default_str();
  bench->add_flag("--json", bench_opts.as_json, "print results as JSON");
  bench->add_option("--seed", bench_opts.seed, "random seed")->envname("LAST_SEED");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) {
      apply_preset(train_opts, train, preset);
      return run_train(train_opts);
    }
    if (eval->parsed()) return run_eval(eval_opts);
    if (encode->parsed()) return run_encode(encode_opts);
    return run_bench(bench_opts);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
