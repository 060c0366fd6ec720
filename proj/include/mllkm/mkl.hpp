#pragma once

#include "mllkm/data.hpp"
#include "mllkm/kernels.hpp"
#include "mllkm/sdca.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace mllkm {

struct MklConfig {
  double C = 100.0;
  /// Inner SDCA epoch budget per solve.
  int epochs = 10;
  std::uint64_t seed = 0;
  /// Inner SDCA stall tolerance (largest KKT violation).
  double inner_tolerance = 1e-3;
  /// Kernels inserted per probe round.
  std::size_t batch = 8;
  /// Maximum number of Gram matrices held at once.
  std::size_t budget = 64;
  /// Weights at or below this value count as zero.
  double prune_threshold = 1e-8;
  /// Relative tolerance of the insertion and equalization tests.
  double violation_tolerance = 1e-3;
  int max_outer_iterations = 100;
  int max_weight_iterations = 100;
  int max_line_search_steps = 20;
  /// Return pruned kernels to the open set instead of forgetting them.
  bool reprocess = false;
  /// Re-solve the inner SVM at every line-search trial. When false, trial
  /// objectives are evaluated at the current alpha (cheap approximation).
  bool resolve_in_line_search = true;

  void validate() const;
  SdcaConfig inner() const;

  /// Score above which an open kernel violates the optimality condition
  /// against the reference score g.
  double violation_threshold(double g) const {
    return g > 0.0 ? g * (1.0 + violation_tolerance) : g + violation_tolerance;
  }
  /// Allowed |a_m - nu| for active kernels.
  double equalization_tolerance(double nu) const {
    return nu > 0.0 ? violation_tolerance * nu : violation_tolerance;
  }
};

struct ActiveKernel {
  KernelId id;
  ConformalMap map;
  GramBlock gram;
  double beta;
};

enum class CandidateStatus : std::uint8_t { open, active, forgotten };

/// Working set of the sequential solver: active kernels with their Gram
/// matrices and weights, the status of every streamed candidate, and the
/// current dual solution.
class ActiveKernelState {
 public:
  ActiveKernelState(std::size_t stream_size, std::size_t budget);

  const std::vector<ActiveKernel>& active() const { return active_; }
  std::vector<ActiveKernel>& active() { return active_; }
  std::size_t size() const { return active_.size(); }
  std::size_t budget() const { return budget_; }

  CandidateStatus status(KernelId id) const { return status_[id]; }
  std::size_t open_count() const;
  std::vector<KernelId> open_ids() const;

  /// Adds a kernel with the given weight. Does not check the budget.
  void insert(KernelId id, ConformalMap map, GramBlock gram, double beta);
  /// Removes active kernel `index`; its candidate becomes open again or is forgotten.
  void remove(std::size_t index, bool reopen);

  Vector betas() const;
  void set_betas(const Vector& beta);
  SquareMatrix combined_gram() const;
  SquareMatrix combined_gram(const Vector& beta) const;

  DualState dual;

  /// Gram matrices currently held / largest number held at any time.
  std::size_t live_grams() const { return active_.size(); }
  std::size_t peak_grams() const { return peak_grams_; }

 private:
  std::vector<ActiveKernel> active_;
  std::vector<CandidateStatus> status_;
  std::size_t budget_;
  std::size_t peak_grams_ = 0;
};

/// 1/2 (alpha o y)^T K (alpha o y), summed over support vectors only.
double alignment_score(const DualState& dual, const Vector& y, const GramBlock& gram);
double alignment_score(const Vector& alpha, const Vector& y, const SquareMatrix& K);

/// Alignment score of a kernel that is not materialized:
/// 1/2 || sum_{i in SV} alpha_i y_i phi(x_i) ||^2. Costs O(|SV| d).
class CandidateScorer {
 public:
  CandidateScorer(const Dataset& data, const DualState& dual);

  double score(const ConformalMap& map) const;
  std::size_t support_count() const { return static_cast<std::size_t>(weights_.size()); }

 private:
  Matrix support_;
  Vector weights_;
};

struct WeightSolveResult {
  int iterations = 0;
  double objective = 0.0;
  /// Line search could not decrease the objective.
  bool stalled = false;
  /// Optimality conditions of the reduced problem hold within tolerance.
  bool converged = false;
};

/// Reduced-gradient descent on J(beta) = max_alpha D(alpha, beta) over the
/// simplex of the active kernels. Updates weights and dual in place.
WeightSolveResult solve_mkl_weights(ActiveKernelState& state, const Vector& y, const MklConfig& config);

struct ProbeResult {
  std::size_t inserted = 0;
  std::size_t violators = 0;
  std::size_t probed = 0;
  /// Reference score g (largest score among positive-weight kernels).
  double reference = 0.0;
  double best_score = 0.0;
  /// Insertion stopped because every cached kernel carries weight.
  bool budget_blocked = false;
};

/// Scores every open candidate against the current dual and inserts the
/// top `batch` violators (ties broken by stream order) at weight 0.
ProbeResult probe_and_insert(ActiveKernelState& state, const CandidateStream& candidates, const Dataset& data,
                             const MklConfig& config);

/// Drops kernels with weight <= prune_threshold (keeping at least one), then
/// evicts the smallest weights while the budget is exceeded, and renormalizes.
/// Returns the number of kernels removed.
std::size_t prune(ActiveKernelState& state, const MklConfig& config);

struct KernelScore {
  KernelId id;
  double beta;
  double score;
  /// nu - score
  double slack;
};

struct KktReport {
  std::vector<KernelScore> active;
  /// Largest score among kernels with positive weight.
  double nu = 0.0;
  std::vector<KernelScore> violators;
  std::size_t probed = 0;
  /// Candidates dropped in budget mode; they are not probed.
  std::vector<KernelId> forgotten;
  double max_open_score = 0.0;
  /// max |score - nu| over positive-weight kernels.
  double max_active_gap = 0.0;
  bool open_satisfied = false;
  bool active_equalized = false;

  bool certified() const { return open_satisfied && active_equalized; }
};

KktReport kkt_report(const ActiveKernelState& state, const CandidateStream& candidates, const Dataset& data,
                     const MklConfig& config);

/// Per-outer-iteration progress record.
struct IterationLog {
  int iteration = 0;
  std::size_t active = 0;
  std::size_t inserted = 0;
  std::size_t pruned = 0;
  std::size_t open = 0;
  /// J before the probe (after the refreshing inner solve) and after the weight solve.
  double objective_before = 0.0;
  double objective = 0.0;
  /// Best open score relative to the reference score.
  double reference = 0.0;
  double best_open_score = 0.0;
  double beta_sum = 0.0;
  double beta_min = 0.0;
  std::size_t live_grams = 0;
  std::size_t peak_grams = 0;
  int weight_iterations = 0;
  bool budget_blocked = false;
};

struct SelectedKernel {
  KernelId id;
  ConformalMap map;
  double beta;
};

struct MklResult {
  std::vector<SelectedKernel> kernels;
  DualState dual;
  KktReport report;
  double objective = 0.0;
  int outer_iterations = 0;
  bool converged = false;
  bool budget_saturated = false;
  std::size_t peak_grams = 0;
};

using IterationSink = std::function<void(const IterationLog&)>;

/// Sequential active-set l1-MKL over a stream of candidate kernels.
MklResult sequential_mkl(const Dataset& data, const CandidateStream& candidates, const MklConfig& config,
                         const IterationSink& sink = {});

}  // namespace mllkm
