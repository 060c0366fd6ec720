#pragma once

#include "mllkm/data.hpp"
#include "mllkm/kernels.hpp"
#include "mllkm/mkl.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

namespace mllkm {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One compressed local predictor: contributes phi_c(x)^T w to the score.
struct Anchor {
  ConformalMap map;
  Vector w;
};

struct TrainingInfo {
  double C = 0.0;
  std::uint64_t seed = 0;
  bool converged = false;
  std::size_t selected_kernels = 0;
  std::size_t support_vectors = 0;
  std::size_t training_samples = 0;
  double objective = 0.0;
};

/// Trained classifier f(x) = sum_c phi_c(x)^T w_c. Evaluation cost depends
/// on the number of anchors and the dimension only.
class MllkmModel {
 public:
  static constexpr int kFormatVersion = 1;

  MllkmModel(Eigen::Index dim, std::vector<Anchor> anchors, std::optional<ScalerParams> scaler, TrainingInfo info);

  Eigen::Index dim() const { return dim_; }
  const std::vector<Anchor>& anchors() const { return anchors_; }
  const std::optional<ScalerParams>& scaler() const { return scaler_; }
  const TrainingInfo& info() const { return info_; }

  /// Score of a raw (unscaled) sample. `map_evaluations`, when given, is
  /// incremented once per conformal map evaluated.
  double score(const Eigen::Ref<const Eigen::RowVectorXd>& x, std::size_t* map_evaluations = nullptr) const;
  /// Score of a sample already in the model's scaled coordinates.
  double score_scaled(const Eigen::Ref<const Eigen::RowVectorXd>& z, std::size_t* map_evaluations = nullptr) const;
  Vector scores(const Matrix& x) const;

  /// sign(score) with sign(0) = +1.
  static double label_of(double score) { return score >= 0.0 ? 1.0 : -1.0; }
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const { return label_of(score(x)); }

 private:
  Eigen::Index dim_;
  std::vector<Anchor> anchors_;
  std::optional<ScalerParams> scaler_;
  TrainingInfo info_;
};

/// w_c = beta_c sum_i alpha_i y_i phi_c(x_i) for every kernel. `data` is the
/// training set in the coordinates the kernels were built in.
MllkmModel compress(const DualState& dual, const Dataset& data, const std::vector<SelectedKernel>& kernels,
                    std::optional<ScalerParams> scaler = std::nullopt, TrainingInfo info = {});

/// Dual expansion sum_i alpha_i y_i sum_c beta_c k_c(x_i, z) at a scaled query.
double dual_expansion_score(const DualState& dual, const Dataset& data, const std::vector<SelectedKernel>& kernels,
                            const Eigen::Ref<const Eigen::RowVectorXd>& z);

void save_model(const MllkmModel& model, const std::filesystem::path& path);
MllkmModel load_model(const std::filesystem::path& path);

std::string model_to_json(const MllkmModel& model);
MllkmModel model_from_json(const std::string& text);

}  // namespace mllkm
