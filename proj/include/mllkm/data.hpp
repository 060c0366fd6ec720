#pragma once

#include "mllkm/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mllkm {

/// Raised for malformed input files. The message carries file and line.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense binary-classification data set: one sample per row, labels in {-1, +1}.
class Dataset {
 public:
  Dataset() = default;

  /// Validates shapes and labels; throws std::invalid_argument otherwise.
  Dataset(Matrix features, Vector labels);

  const Matrix& features() const { return features_; }
  const Vector& labels() const { return labels_; }
  Eigen::Index size() const { return features_.rows(); }
  Eigen::Index dim() const { return features_.cols(); }

  auto sample(Eigen::Index i) const { return features_.row(i); }
  double label(Eigen::Index i) const { return labels_[i]; }

  /// Rows selected by index, in the given order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;

 private:
  Matrix features_;
  Vector labels_;
};

struct ScalerParams {
  Vector mean;
  Vector scale;

  Matrix apply(const Matrix& x) const;
  Vector apply(const Eigen::Ref<const Vector>& x) const;
  Matrix invert(const Matrix& z) const;
};

Dataset load_libsvm(const std::filesystem::path& path);

/// Reads a rectangular, fully numeric CSV (no header). Blank lines are ignored.
Dataset load_csv(const std::filesystem::path& path, std::size_t label_column);

/// Unlabeled numeric CSV (prediction inputs).
Matrix load_csv_features(const std::filesystem::path& path);

void save_libsvm(const Dataset& data, const std::filesystem::path& path);

/// Centers each column and scales it to unit population standard deviation.
/// Zero-variance columns are centered only.
std::pair<Dataset, ScalerParams> standardize(const Dataset& train);

/// Seeded Fisher-Yates split; the first round(train_fraction * n) permuted
/// rows form the training part.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction,
                                  std::uint64_t seed);

/// Continuous piecewise-linear boundary y = b(x) over x in [0, 1].
struct PiecewiseBoundary {
  std::vector<double> knot_x;
  std::vector<double> knot_y;

  double operator()(double x) const;
  /// +1 above the boundary, -1 on or below it.
  double label(double x, double y) const;
};

struct SyntheticTask {
  Dataset data;
  PiecewiseBoundary boundary;
};

/// Uniform points on [0,1]^2 labeled by a random zig-zag piecewise-linear
/// boundary with `num_segments` pieces. Knots are evenly spaced in x and
/// alternate between a low band and a high band in y, so every extra segment
/// adds a bend. The boundary is redrawn from the same stream until both
/// classes are present.
SyntheticTask gen_piecewise_task(Eigen::Index n, int num_segments, std::uint64_t seed);

Dataset gen_piecewise(Eigen::Index n, int num_segments, std::uint64_t seed);

}  // namespace mllkm
