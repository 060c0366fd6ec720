#pragma once

#include "mllkm/data.hpp"
#include "mllkm/kernels.hpp"
#include "mllkm/mkl.hpp"
#include "mllkm/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mllkm {

struct TrainOptions {
  CandidateSpec candidates{Family::gauss, Scope::global, log_gamma_grid(0.01, 10.0, 5)};
  MklConfig mkl;
  bool standardize = true;
};

struct TrainOutcome {
  MllkmModel model;
  MklResult result;
  double seconds = 0.0;
};

/// Standardizes (optionally), streams one candidate per (sample, gamma) pair,
/// runs the sequential solver and compresses the result.
TrainOutcome train_mllkm(const Dataset& train, const TrainOptions& options, const IterationSink& sink = {});

/// Plain linear-kernel SVM trained by the same SDCA solver. With `bias` set the
/// solver sees [x, 1] and the constant column acts as an offset.
struct LinearModel {
  Vector w;
  double bias = 0.0;
  std::optional<ScalerParams> scaler;
  std::size_t support_vectors = 0;

  double score(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

LinearModel train_linear_baseline(const Dataset& train, const SdcaConfig& config, bool standardize = true,
                                  bool bias = false);

struct SplitRecord {
  int split = 0;
  double accuracy = 0.0;
  double train_seconds = 0.0;
  double infer_us_per_sample = 0.0;
  std::size_t kernels = 0;
  std::size_t support_vectors = 0;
  bool converged = true;
};

struct ColumnSummary {
  double mean = 0.0;
  /// Sample standard deviation; 0 for a single split.
  double stddev = 0.0;
};

struct BenchResult {
  std::string method;
  std::vector<SplitRecord> splits;

  ColumnSummary accuracy() const;
  ColumnSummary train_seconds() const;
  ColumnSummary infer_us_per_sample() const;
  ColumnSummary kernels() const;
  ColumnSummary support_vectors() const;
};

ColumnSummary summarize(const std::vector<double>& values);

struct BenchOptions {
  int splits = 10;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
  TrainOptions train;
  bool linear_baseline = false;
  bool baseline_bias = false;
  /// Worker threads; 0 reads MLLKM_THREADS, falling back to the hardware count.
  unsigned threads = 0;
};

struct BenchReport {
  BenchResult mllkm;
  std::optional<BenchResult> baseline;
};

/// Seed used for split `index` of a benchmark run.
std::uint64_t split_seed(std::uint64_t seed, int index);

/// Repeated random train/test splits; rows are ordered by split index.
BenchReport run_bench(const Dataset& data, const BenchOptions& options);

inline constexpr const char* kBenchCsvHeader = "split,accuracy,train_s,infer_us_per_sample,kernels,svs";

void write_bench_csv(const BenchResult& result, const std::filesystem::path& path);
BenchResult read_bench_csv(const std::filesystem::path& path);
std::string format_bench_table(const BenchReport& report);

/// Worker count from MLLKM_THREADS (>= 1), else hardware concurrency.
unsigned worker_threads();

}  // namespace mllkm
