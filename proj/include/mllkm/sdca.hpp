#pragma once

#include "mllkm/kernels.hpp"
#include "mllkm/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace mllkm {

struct SdcaConfig {
  double C = 1.0;
  /// Epoch budget.
  int epochs = 10;
  std::uint64_t seed = 0;
  /// Stop early once the largest KKT violation drops to this value.
  std::optional<double> stall_tolerance = 1e-3;
  /// Reproduce the printed update that only refreshes yhat_j for j >= i.
  bool restricted_update = false;
  /// Record the dual objective after every epoch (costs one O(n^2) product per epoch).
  bool track_objective = false;

  void validate() const;
};

struct DualState {
  Vector alpha;
  /// yhat = K (alpha o y).
  Vector yhat;

  /// Epochs run by the call that produced this state.
  int epochs = 0;
  /// Coordinates with K_ii = 0 that were updated (moved straight to a bound).
  std::size_t zero_diagonal = 0;
  double max_kkt_violation = 0.0;
  /// True when the stall tolerance fired before the epoch budget ran out.
  bool stalled = false;
  /// Dual objective at the start (index 0) and after each epoch, when tracked.
  std::vector<double> objective_trace;

  std::size_t support_count() const;
};

/// Stochastic dual coordinate ascent on max_{0 <= alpha <= C} sum(alpha) - 1/2 (alpha o y)^T K (alpha o y).
/// `warm` supplies the starting alpha; its yhat is recomputed against K.
DualState sdca(const Vector& y, const SquareMatrix& K, const SdcaConfig& config, const DualState* warm = nullptr);
DualState sdca(const Vector& y, const GramBlock& K, const SdcaConfig& config, const DualState* warm = nullptr);

/// sum_i alpha_i - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
double dual_objective(const Vector& alpha, const Vector& y, const SquareMatrix& K);

/// Entry q is sum_i alpha_i y_i K(x_i, x_q); `cross` holds K(x_i, x_q) with
/// training samples as rows and queries as columns.
Vector decision_values(const Vector& alpha, const Vector& y, const Eigen::Ref<const Eigen::MatrixXd>& cross);

/// Largest violation of the box-constrained optimality conditions.
double max_kkt_violation(const Vector& alpha, const Vector& y, const Vector& yhat, const SquareMatrix& K, double C);

}  // namespace mllkm
