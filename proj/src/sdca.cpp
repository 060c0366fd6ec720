#include "mllkm/sdca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mllkm {

void SdcaConfig::validate() const {
  if (!(C > 0.0)) throw std::invalid_argument("SDCA needs C > 0");
  if (epochs < 1) throw std::invalid_argument("SDCA needs at least one epoch");
  if (stall_tolerance && !(*stall_tolerance >= 0.0)) throw std::invalid_argument("stall tolerance must be >= 0");
}

std::size_t DualState::support_count() const {
  return static_cast<std::size_t>((alpha.array() > 0.0).count());
}

double dual_objective(const Vector& alpha, const Vector& y, const SquareMatrix& K) {
  const Vector v = alpha.cwiseProduct(y);
  return alpha.sum() - 0.5 * v.dot(K.selfadjointView<Eigen::Upper>() * v);
}

Vector decision_values(const Vector& alpha, const Vector& y, const Eigen::Ref<const Eigen::MatrixXd>& cross) {
  if (cross.rows() != alpha.size() || y.size() != alpha.size()) {
    throw std::invalid_argument("decision_values: shape mismatch");
  }
  return cross.transpose() * alpha.cwiseProduct(y);
}

double max_kkt_violation(const Vector& alpha, const Vector& y, const Vector& yhat, const SquareMatrix& K, double C) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    const double g = 1.0 - y[i] * yhat[i];
    double violation = 0.0;
    if (alpha[i] <= 0.0) {
      violation = std::max(0.0, g);
    } else if (alpha[i] >= C) {
      violation = std::max(0.0, -g);
    } else {
      violation = std::abs(g);
    }
    worst = std::max(worst, violation);
  }
  return worst;
}

DualState sdca(const Vector& y, const SquareMatrix& K, const SdcaConfig& config, const DualState* warm) {
  config.validate();
  const Eigen::Index n = y.size();
  if (K.rows() != n || K.cols() != n) throw std::invalid_argument("SDCA: Gram matrix shape does not match labels");

  DualState state;
  if (warm != nullptr && warm->alpha.size() == n) {
    state.alpha = warm->alpha.cwiseMax(0.0).cwiseMin(config.C);
    state.yhat = K.selfadjointView<Eigen::Upper>() * state.alpha.cwiseProduct(y);
  } else {
    state.alpha = Vector::Zero(n);
    state.yhat = Vector::Zero(n);
  }
  if (config.track_objective) state.objective_trace.push_back(dual_objective(state.alpha, y, K));

  const double C = config.C;
  std::vector<char> zero_diagonal_hit(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  Rng rng(config.seed);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    rng.shuffle(order);
    for (const Eigen::Index i : order) {
      const double g = 1.0 - y[i] * state.yhat[i];
      const double a = state.alpha[i];
      if (g == 0.0 || (g > 0.0 && a == C) || (g < 0.0 && a == 0.0)) continue;
      const double kii = K(i, i);
      double updated = 0.0;
      if (kii > 0.0) {
        updated = std::clamp(a + g / kii, 0.0, C);
      } else {
        // D is linear in alpha_i here, so the exact maximizer is a bound.
        zero_diagonal_hit[static_cast<std::size_t>(i)] = 1;
        updated = g > 0.0 ? C : 0.0;
      }
      const double delta = updated - a;
      if (delta == 0.0) continue;
      state.alpha[i] = updated;
      const double step = delta * y[i];
      if (config.restricted_update) {
        state.yhat.tail(n - i) += step * K.col(i).tail(n - i);
      } else {
        state.yhat += step * K.col(i);
      }
    }
    state.epochs = epoch + 1;
    if (config.track_objective) state.objective_trace.push_back(dual_objective(state.alpha, y, K));
    if (config.stall_tolerance) {
      state.max_kkt_violation = max_kkt_violation(state.alpha, y, state.yhat, K, C);
      if (state.max_kkt_violation <= *config.stall_tolerance) {
        state.stalled = true;
        break;
      }
    }
  }
  if (!config.stall_tolerance) state.max_kkt_violation = max_kkt_violation(state.alpha, y, state.yhat, K, C);
  state.zero_diagonal =
      static_cast<std::size_t>(std::count(zero_diagonal_hit.begin(), zero_diagonal_hit.end(), char{1}));
  return state;
}

DualState sdca(const Vector& y, const GramBlock& K, const SdcaConfig& config, const DualState* warm) {
  return sdca(y, K.values, config, warm);
}

}  // namespace mllkm
