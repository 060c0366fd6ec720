#include "mllkm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

namespace mllkm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Best of three timed passes over the test set, in microseconds per sample.
template <typename ScoreFn>
double time_inference(const Dataset& test, ScoreFn&& score_fn) {
  double best = std::numeric_limits<double>::infinity();
  volatile double sink = 0.0;
  for (int repeat = 0; repeat < 3; ++repeat) {
    const auto start = Clock::now();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < test.size(); ++i) acc += score_fn(test.sample(i));
    best = std::min(best, seconds_since(start));
    sink = sink + acc;
  }
  return best * 1e6 / static_cast<double>(test.size());
}

template <typename ScoreFn>
double accuracy_of(const Dataset& test, ScoreFn&& score_fn) {
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    if (MllkmModel::label_of(score_fn(test.sample(i))) == test.label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace

TrainOutcome train_mllkm(const Dataset& train, const TrainOptions& options, const IterationSink& sink) {
  const auto start = Clock::now();
  std::optional<ScalerParams> scaler;
  Dataset working = train;
  if (options.standardize) {
    auto [scaled, params] = standardize(train);
    working = std::move(scaled);
    scaler = std::move(params);
  }
  const CandidateStream stream(working, options.candidates);
  MklResult result = sequential_mkl(working, stream, options.mkl, sink);
  TrainingInfo info;
  info.C = options.mkl.C;
  info.seed = options.mkl.seed;
  info.converged = result.converged;
  info.objective = result.objective;
  MllkmModel model = compress(result.dual, working, result.kernels, std::move(scaler), info);
  const double seconds = seconds_since(start);
  return TrainOutcome{std::move(model), std::move(result), seconds};
}

double LinearModel::score(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (x.size() != w.size()) throw std::invalid_argument("dimension mismatch in linear model");
  if (!scaler) return x.dot(w.transpose()) + bias;
  return (((x - scaler->mean.transpose()).array() / scaler->scale.transpose().array()).matrix()).dot(w.transpose()) +
         bias;
}

LinearModel train_linear_baseline(const Dataset& train, const SdcaConfig& config, bool standardize_inputs,
                                  bool bias) {
  LinearModel model;
  Matrix z = train.features();
  if (standardize_inputs) {
    auto [scaled, params] = standardize(train);
    z = scaled.features();
    model.scaler = std::move(params);
  }
  Matrix augmented(z.rows(), z.cols() + (bias ? 1 : 0));
  augmented.leftCols(z.cols()) = z;
  if (bias) augmented.col(z.cols()).setOnes();
  SquareMatrix K = SquareMatrix::Zero(z.rows(), z.rows());
  K.selfadjointView<Eigen::Upper>().rankUpdate(augmented);
  K.triangularView<Eigen::StrictlyLower>() = K.transpose();

  const DualState dual = sdca(train.labels(), K, config);
  const Vector coef = dual.alpha.cwiseProduct(train.labels());
  const Vector full = augmented.transpose() * coef;
  model.w = full.head(z.cols());
  if (bias) model.bias = full[z.cols()];
  model.support_vectors = dual.support_count();
  return model;
}

ColumnSummary summarize(const std::vector<double>& values) {
  ColumnSummary s;
  if (values.empty()) return s;
  double total = 0.0;
  for (const double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (const double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

namespace {

template <typename Field>
ColumnSummary column(const std::vector<SplitRecord>& rows, Field field) {
  std::vector<double> values;
  values.reserve(rows.size());
  for (const auto& row : rows) values.push_back(static_cast<double>(field(row)));
  return summarize(values);
}

}  // namespace

ColumnSummary BenchResult::accuracy() const {
  return column(splits, [](const SplitRecord& r) { return r.accuracy; });
}
ColumnSummary BenchResult::train_seconds() const {
  return column(splits, [](const SplitRecord& r) { return r.train_seconds; });
}
ColumnSummary BenchResult::infer_us_per_sample() const {
  return column(splits, [](const SplitRecord& r) { return r.infer_us_per_sample; });
}
ColumnSummary BenchResult::kernels() const {
  return column(splits, [](const SplitRecord& r) { return r.kernels; });
}
ColumnSummary BenchResult::support_vectors() const {
  return column(splits, [](const SplitRecord& r) { return r.support_vectors; });
}

std::uint64_t split_seed(std::uint64_t seed, int index) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

unsigned worker_threads() {
  if (const char* env = std::getenv("MLLKM_THREADS"); env != nullptr) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && value >= 1) return static_cast<unsigned>(value);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

BenchReport run_bench(const Dataset& data, const BenchOptions& options) {
  if (options.splits < 1) throw std::invalid_argument("bench needs at least one split");
  const auto count = static_cast<std::size_t>(options.splits);
  std::vector<SplitRecord> mllkm_rows(count);
  std::vector<SplitRecord> baseline_rows(count);
  std::vector<std::exception_ptr> errors(count);

  auto run_split = [&](std::size_t index) {
    const int split_index = static_cast<int>(index);
    const std::uint64_t seed = split_seed(options.seed, split_index);
    auto [train, test] = split(data, options.train_fraction, seed);

    TrainOptions train_options = options.train;
    train_options.mkl.seed = seed;
    const TrainOutcome outcome = train_mllkm(train, train_options);
    const auto score = [&](const auto& x) { return outcome.model.score(x); };
    SplitRecord& row = mllkm_rows[index];
    row.split = split_index;
    row.accuracy = accuracy_of(test, score);
    row.train_seconds = outcome.seconds;
    row.infer_us_per_sample = time_inference(test, score);
    row.kernels = outcome.model.anchors().size();
    row.support_vectors = outcome.model.info().support_vectors;
    row.converged = outcome.result.converged;

    if (options.linear_baseline) {
      const auto start = Clock::now();
      SdcaConfig config = options.train.mkl.inner();
      config.seed = seed;
      const LinearModel linear = train_linear_baseline(train, config, options.train.standardize, options.baseline_bias);
      SplitRecord& base = baseline_rows[index];
      base.split = split_index;
      base.train_seconds = seconds_since(start);
      const auto linear_score = [&](const auto& x) { return linear.score(x); };
      base.accuracy = accuracy_of(test, linear_score);
      base.infer_us_per_sample = time_inference(test, linear_score);
      base.kernels = 1;
      base.support_vectors = linear.support_vectors;
    }
  };

  const unsigned threads = std::min<unsigned>(options.threads > 0 ? options.threads : worker_threads(),
                                              static_cast<unsigned>(count));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        run_split(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();
  }
  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }

  BenchReport report;
  report.mllkm.method = std::string("MLLKM (") + std::string(to_string(options.train.candidates.scope)) + " " +
                        std::string(to_string(options.train.candidates.family)) + ")";
  report.mllkm.splits = std::move(mllkm_rows);
  if (options.linear_baseline) report.baseline = BenchResult{"linear SVM (SDCA)", std::move(baseline_rows)};
  return report;
}

void write_bench_csv(const BenchResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << kBenchCsvHeader << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& row : result.splits) {
    out << row.split << ',' << row.accuracy << ',' << row.train_seconds << ',' << row.infer_us_per_sample << ','
        << row.kernels << ',' << row.support_vectors << '\n';
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

BenchResult read_bench_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != kBenchCsvHeader) {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  BenchResult result;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    SplitRecord row;
    char comma = 0;
    if (!(fields >> row.split >> comma >> row.accuracy >> comma >> row.train_seconds >> comma >>
          row.infer_us_per_sample >> comma >> row.kernels >> comma >> row.support_vectors)) {
      throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    }
    result.splits.push_back(row);
  }
  return result;
}

std::string format_bench_table(const BenchReport& report) {
  std::ostringstream out;
  out << std::fixed;
  auto emit = [&](const BenchResult& r) {
    const auto acc = r.accuracy();
    const auto infer = r.infer_us_per_sample();
    const auto kernels = r.kernels();
    const auto svs = r.support_vectors();
    const auto train = r.train_seconds();
    out << std::left << std::setw(28) << r.method << std::right << std::setprecision(1) << std::setw(7)
        << 100.0 * acc.mean << " +- " << std::setw(4) << 100.0 * acc.stddev << std::setprecision(2) << std::setw(10)
        << infer.mean << " +- " << std::setw(6) << infer.stddev << std::setprecision(1) << std::setw(8)
        << kernels.mean << " +- " << std::setw(5) << kernels.stddev << std::setw(8) << svs.mean << " +- "
        << std::setw(5) << svs.stddev << std::setprecision(2) << std::setw(9) << train.mean << '\n';
  };
  out << std::left << std::setw(28) << "method" << std::right << std::setw(18) << "accuracy (%)" << std::setw(20)
      << "infer (us/sample)" << std::setw(16) << "kernels" << std::setw(16) << "svs" << std::setw(9) << "train s"
      << '\n';
  emit(report.mllkm);
  if (report.baseline) emit(*report.baseline);
  return out.str();
}

}  // namespace mllkm
