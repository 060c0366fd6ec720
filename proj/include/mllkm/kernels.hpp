#pragma once

#include "mllkm/data.hpp"
#include "mllkm/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mllkm {

/// Conformal map families h(t) of a distance t:
///   exp    e^{-gamma t}
///   gauss  e^{-gamma t^2}
///   linear max(0, 1 - gamma t)
///   square max(0, 1 - gamma t^2)
enum class Family { exp, gauss, linear, square };

/// global: one weight from the euclidean distance to the center.
/// componentwise: one weight per coordinate from |x_j - c_j|.
enum class Scope { global, componentwise };

std::string_view to_string(Family family);
std::string_view to_string(Scope scope);
Family parse_family(std::string_view name);
/// Accepts "global", "componentwise" and the short form "component".
Scope parse_scope(std::string_view name);

/// h applied to a non-negative distance.
double conformal_weight(Family family, double gamma, double distance);

/// One locally linear kernel: phi(x) = h(x) (x - center), or h(x) o (x - center)
/// for componentwise scope.
class ConformalMap {
 public:
  ConformalMap(Family family, Scope scope, double gamma, Vector center);

  Family family() const { return family_; }
  Scope scope() const { return scope_; }
  double gamma() const { return gamma_; }
  const Vector& center() const { return center_; }
  Eigen::Index dim() const { return center_.size(); }

  /// Scalar weight of a global map. Throws for componentwise maps.
  double weight(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  /// Per-coordinate weights (global maps repeat the scalar weight).
  Eigen::RowVectorXd weights(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;

  Eigen::RowVectorXd feature_map(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  /// phi applied to every row.
  Matrix feature_map(const Matrix& x) const;

  double kernel(const Eigen::Ref<const Eigen::RowVectorXd>& x1, const Eigen::Ref<const Eigen::RowVectorXd>& x2) const;

  bool operator==(const ConformalMap&) const = default;

 private:
  void check_dim(Eigen::Index d) const;

  Family family_;
  Scope scope_;
  double gamma_;
  Vector center_;
};

/// Evaluates h: a scalar for global maps wrapped in a length-1 vector, or the
/// per-coordinate weights for componentwise maps.
Eigen::RowVectorXd eval_map(const ConformalMap& map, const Eigen::Ref<const Eigen::RowVectorXd>& x);
Eigen::RowVectorXd feature_map(const ConformalMap& map, const Eigen::Ref<const Eigen::RowVectorXd>& x);
double kernel_eval(const ConformalMap& map, const Eigen::Ref<const Eigen::RowVectorXd>& x1,
                   const Eigen::Ref<const Eigen::RowVectorXd>& x2);

using KernelId = std::uint64_t;

struct GramBlock {
  KernelId id = 0;
  SquareMatrix values;
};

/// Gram matrix of one map over the data. Only the upper triangle is computed.
GramBlock gram(const ConformalMap& map, const Dataset& data, KernelId id = 0);
SquareMatrix gram_matrix(const ConformalMap& map, const Matrix& x);

/// Entrywise sum of beta_m * gram(map_m). Weights must be non-negative.
GramBlock combined_gram(std::span<const std::pair<ConformalMap, double>> active, const Dataset& data);

/// 10^linspace(log10 lo, log10 hi, count). count == 1 yields {lo}.
std::vector<double> log_gamma_grid(double lo, double hi, int count);

/// Template for one candidate family: every training sample is an anchor and
/// every grid value a bandwidth.
struct CandidateSpec {
  Family family = Family::gauss;
  Scope scope = Scope::global;
  std::vector<double> gamma_grid;

  /// Throws unless the grid is non-empty, positive and strictly increasing.
  void validate() const;
};

/// Lazily enumerates n * |grid| candidate maps, sample-major then gamma
/// ascending. Candidate ids are stream positions.
class CandidateStream {
 public:
  CandidateStream(const Dataset& data, CandidateSpec spec);

  std::size_t size() const { return static_cast<std::size_t>(anchors_.rows()) * spec_.gamma_grid.size(); }
  ConformalMap at(KernelId id) const;
  Eigen::Index anchor_of(KernelId id) const;
  double gamma_of(KernelId id) const;
  const CandidateSpec& spec() const { return spec_; }

 private:
  Matrix anchors_;
  CandidateSpec spec_;
};

}  // namespace mllkm
