#include "mllkm/cli.hpp"

#include "mllkm/data.hpp"
#include "mllkm/model.hpp"
#include "mllkm/pipeline.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

namespace mllkm {

namespace {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataFlags {
  std::string path;
  std::string format = "libsvm";
  std::optional<std::size_t> label_column;
};

struct TrainFlags {
  DataFlags data;
  std::string family = "gauss";
  std::string scope = "global";
  std::string gammas = "0.01:10:5";
  double C = 100.0;
  int epochs = 10;
  std::size_t budget = 64;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
  std::string standardize = "on";
  std::string reprocess = "off";
  std::string log_path;
};

void add_data_flags(CLI::App& cmd, DataFlags& flags, bool required) {
  auto* data = cmd.add_option("--data", flags.path, "input dataset");
  if (required) data->required();
  cmd.add_option("--format", flags.format, "libsvm or csv")->check(CLI::IsMember({"libsvm", "csv"}));
  cmd.add_option("--label-column", flags.label_column, "0-based label column for csv input");
}

void add_train_flags(CLI::App& cmd, TrainFlags& flags) {
  add_data_flags(cmd, flags.data, true);
  cmd.add_option("--family", flags.family, "exp|gauss|linear|square")
      ->check(CLI::IsMember({"exp", "gauss", "linear", "square"}));
  cmd.add_option("--scope", flags.scope, "global|component")->check(CLI::IsMember({"global", "component"}));
  cmd.add_option("--gammas", flags.gammas, "lo:hi:count, log-spaced");
  cmd.add_option("--C", flags.C, "box constraint")->check(CLI::PositiveNumber);
  cmd.add_option("--epochs", flags.epochs, "SDCA epochs per inner solve")->check(CLI::PositiveNumber);
  cmd.add_option("--budget", flags.budget, "maximum active kernels")->check(CLI::PositiveNumber);
  cmd.add_option("--batch", flags.batch, "kernels inserted per outer iteration")->check(CLI::PositiveNumber);
  cmd.add_option("--seed", flags.seed, "random seed");
  cmd.add_option("--standardize", flags.standardize, "on|off")->check(CLI::IsMember({"on", "off"}));
  cmd.add_option("--reprocess", flags.reprocess, "on|off")->check(CLI::IsMember({"on", "off"}));
  cmd.add_option("--log", flags.log_path, "per-iteration log, one JSON object per line");
}

std::vector<double> parse_gammas(const std::string& text) {
  const auto first = text.find(':');
  const auto second = first == std::string::npos ? std::string::npos : text.find(':', first + 1);
  if (second == std::string::npos || text.find(':', second + 1) != std::string::npos) {
    throw CliError("--gammas expects lo:hi:count, got '" + text + "'");
  }
  try {
    std::size_t used = 0;
    const std::string lo_text = text.substr(0, first);
    const std::string hi_text = text.substr(first + 1, second - first - 1);
    const std::string count_text = text.substr(second + 1);
    const double lo = std::stod(lo_text, &used);
    if (used != lo_text.size()) throw std::invalid_argument(lo_text);
    const double hi = std::stod(hi_text, &used);
    if (used != hi_text.size()) throw std::invalid_argument(hi_text);
    const int count = std::stoi(count_text, &used);
    if (used != count_text.size()) throw std::invalid_argument(count_text);
    return log_gamma_grid(lo, hi, count);
  } catch (const std::logic_error& e) {
    throw CliError("--gammas '" + text + "': " + e.what());
  }
}

Dataset load_labeled(const DataFlags& flags) {
  if (flags.format == "csv") {
    if (!flags.label_column) throw CliError("--label-column is required for labeled csv input");
    return load_csv(flags.path, *flags.label_column);
  }
  return load_libsvm(flags.path);
}

TrainOptions train_options(const TrainFlags& flags) {
  TrainOptions options;
  options.candidates = CandidateSpec{parse_family(flags.family), parse_scope(flags.scope), parse_gammas(flags.gammas)};
  options.candidates.validate();
  options.mkl.C = flags.C;
  options.mkl.epochs = flags.epochs;
  options.mkl.budget = flags.budget;
  options.mkl.batch = flags.batch;
  options.mkl.seed = flags.seed;
  options.mkl.reprocess = flags.reprocess == "on";
  options.mkl.validate();
  options.standardize = flags.standardize == "on";
  return options;
}

nlohmann::json log_entry(const IterationLog& log) {
  return {{"iteration", log.iteration},
          {"active", log.active},
          {"inserted", log.inserted},
          {"pruned", log.pruned},
          {"open", log.open},
          {"objective_before", log.objective_before},
          {"objective", log.objective},
          {"max_violation", log.reference > 0.0 ? log.best_open_score / log.reference : 0.0},
          {"best_open_score", log.best_open_score},
          {"reference", log.reference},
          {"beta_sum", log.beta_sum},
          {"beta_min", log.beta_min},
          {"live_grams", log.live_grams},
          {"peak_grams", log.peak_grams},
          {"weight_iterations", log.weight_iterations},
          {"budget_blocked", log.budget_blocked}};
}

int cmd_train(const TrainFlags& flags, const std::string& out_path, bool strict, std::ostream& out) {
  const Dataset data = load_labeled(flags.data);
  const TrainOptions options = train_options(flags);

  std::ofstream log_file;
  if (!flags.log_path.empty()) {
    log_file.open(flags.log_path);
    if (!log_file) throw CliError(flags.log_path + ": cannot open for writing");
  }
  IterationSink sink;
  if (log_file.is_open()) sink = [&](const IterationLog& log) { log_file << log_entry(log).dump() << '\n'; };

  const TrainOutcome outcome = train_mllkm(data, options, sink);
  save_model(outcome.model, out_path);
  out << "kernels " << outcome.model.anchors().size() << '\n'
      << "support_vectors " << outcome.model.info().support_vectors << '\n'
      << std::setprecision(10) << "objective " << outcome.result.objective << '\n'
      << "outer_iterations " << outcome.result.outer_iterations << '\n'
      << "converged " << (outcome.result.converged ? "true" : "false") << '\n'
      << std::setprecision(3) << "train_seconds " << outcome.seconds << '\n';
  return strict && !outcome.result.converged ? 2 : 0;
}

Matrix pad_columns(const Matrix& x, Eigen::Index dim) {
  if (x.cols() > dim) {
    throw CliError("dimension mismatch: data has " + std::to_string(x.cols()) + " features, model expects " +
                   std::to_string(dim));
  }
  if (x.cols() == dim) return x;
  Matrix padded = Matrix::Zero(x.rows(), dim);
  padded.leftCols(x.cols()) = x;
  return padded;
}

int cmd_predict(const std::string& model_path, const DataFlags& flags, const std::string& out_path,
                std::ostream& out) {
  const MllkmModel model = load_model(model_path);
  Matrix x;
  std::optional<Vector> labels;
  if (flags.format == "csv" && !flags.label_column) {
    x = load_csv_features(flags.path);
    if (x.cols() != model.dim()) {
      throw CliError("dimension mismatch: data has " + std::to_string(x.cols()) + " features, model expects " +
                     std::to_string(model.dim()));
    }
  } else {
    const Dataset data = load_labeled(flags);
    // LIBSVM rows omit trailing zero features, so a narrower file is padded.
    x = flags.format == "libsvm" ? pad_columns(data.features(), model.dim()) : data.features();
    if (x.cols() != model.dim()) {
      throw CliError("dimension mismatch: data has " + std::to_string(x.cols()) + " features, model expects " +
                     std::to_string(model.dim()));
    }
    labels = data.labels();
  }

  std::ofstream file(out_path);
  if (!file) throw CliError(out_path + ": cannot open for writing");
  file << std::setprecision(std::numeric_limits<double>::max_digits10);
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double s = model.score(x.row(i));
    const double label = MllkmModel::label_of(s);
    file << s << '\t' << (label > 0 ? "+1" : "-1") << '\n';
    if (labels && label == (*labels)[i]) ++correct;
  }
  if (!file) throw CliError(out_path + ": write failed");
  out << "predictions " << x.rows() << '\n';
  if (labels) {
    out << std::fixed << std::setprecision(4)
        << "accuracy " << static_cast<double>(correct) / static_cast<double>(x.rows()) << '\n';
  }
  return 0;
}

int cmd_bench(const TrainFlags& flags, int splits, double train_fraction, const std::string& baseline, bool bias,
              const std::string& csv_path, const std::string& baseline_csv_path, std::ostream& out) {
  const Dataset data = load_labeled(flags.data);
  BenchOptions options;
  options.splits = splits;
  options.train_fraction = train_fraction;
  options.seed = flags.seed;
  options.train = train_options(flags);
  options.linear_baseline = baseline == "linear";
  options.baseline_bias = bias;
  const BenchReport report = run_bench(data, options);

  out << "split  method                       accuracy  train_s  infer_us  kernels   svs\n";
  auto rows = [&](const BenchResult& result) {
    for (const auto& row : result.splits) {
      out << std::setw(5) << row.split << "  " << std::left << std::setw(28) << result.method << std::right
          << std::fixed << std::setprecision(4) << std::setw(9) << row.accuracy << std::setprecision(3)
          << std::setw(9) << row.train_seconds << std::setw(10) << row.infer_us_per_sample << std::setw(9)
          << row.kernels << std::setw(6) << row.support_vectors << '\n';
    }
  };
  rows(report.mllkm);
  if (report.baseline) rows(*report.baseline);
  out << '\n' << format_bench_table(report);

  if (!csv_path.empty()) write_bench_csv(report.mllkm, csv_path);
  if (!baseline_csv_path.empty()) {
    if (!report.baseline) throw CliError("--baseline-csv needs --baseline linear");
    write_bench_csv(*report.baseline, baseline_csv_path);
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiple locally linear kernel machine", "mllkm"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  std::string model_out;
  bool strict = false;
  auto* train = app.add_subcommand("train", "train a model and write it as JSON");
  add_train_flags(*train, train_flags);
  train->add_option("--out", model_out, "model output path")->required();
  train->add_flag("--strict", strict, "exit with status 2 if the solver did not converge");

  std::string model_in;
  std::string predictions_out;
  DataFlags predict_flags;
  auto* predict = app.add_subcommand("predict", "score a dataset with a saved model");
  predict->add_option("--model", model_in, "model JSON")->required();
  add_data_flags(*predict, predict_flags, true);
  predict->add_option("--out", predictions_out, "predictions output path")->required();

  TrainFlags bench_flags;
  int splits = 10;
  double train_fraction = 0.7;
  std::string baseline;
  std::string csv_path;
  std::string baseline_csv_path;
  bool baseline_bias = false;
  auto* bench = app.add_subcommand("bench", "repeated random train/test splits");
  add_train_flags(*bench, bench_flags);
  bench->add_option("--splits", splits, "number of random splits")->check(CLI::PositiveNumber);
  bench->add_option("--train-frac", train_fraction, "training fraction")->check(CLI::Range(0.0, 1.0));
  bench->add_option("--baseline", baseline, "also train a baseline")->check(CLI::IsMember({"linear"}));
  bench->add_flag("--baseline-bias", baseline_bias, "give the linear baseline an offset term");
  bench->add_option("--csv", csv_path, "per-split CSV for the MLLKM arm");
  bench->add_option("--baseline-csv", baseline_csv_path, "per-split CSV for the baseline arm");

  long long synth_n = 1000;
  int segments = 4;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a piecewise-linear two-class dataset");
  synth->add_option("--n", synth_n, "number of samples")->check(CLI::PositiveNumber);
  synth->add_option("--segments", segments, "boundary segments")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--out", synth_out, "LIBSVM output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*train) return cmd_train(train_flags, model_out, strict, out);
    if (*predict) return cmd_predict(model_in, predict_flags, predictions_out, out);
    if (*bench) {
      return cmd_bench(bench_flags, splits, train_fraction, baseline, baseline_bias, csv_path, baseline_csv_path, out);
    }
    save_libsvm(gen_piecewise(static_cast<Eigen::Index>(synth_n), segments, synth_seed), synth_out);
    out << "wrote " << synth_n << " samples to " << synth_out << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mllkm
