#include "mllkm/mkl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

namespace mllkm {

void MklConfig::validate() const {
  if (!(C > 0.0)) throw std::invalid_argument("MKL needs C > 0");
  if (epochs < 1) throw std::invalid_argument("MKL needs at least one inner epoch");
  if (batch < 1) throw std::invalid_argument("insertion batch size must be >= 1");
  if (budget < batch + 1) throw std::invalid_argument("Gram budget must be at least batch + 1");
  if (!(prune_threshold >= 0.0)) throw std::invalid_argument("pruning threshold must be >= 0");
  if (!(violation_tolerance >= 0.0)) throw std::invalid_argument("violation tolerance must be >= 0");
  if (!(inner_tolerance >= 0.0)) throw std::invalid_argument("inner tolerance must be >= 0");
  if (max_outer_iterations < 1 || max_weight_iterations < 1 || max_line_search_steps < 1) {
    throw std::invalid_argument("iteration caps must be >= 1");
  }
}

SdcaConfig MklConfig::inner() const {
  SdcaConfig inner;
  inner.C = C;
  inner.epochs = epochs;
  inner.seed = seed;
  inner.stall_tolerance = inner_tolerance;
  return inner;
}

ActiveKernelState::ActiveKernelState(std::size_t stream_size, std::size_t budget)
    : status_(stream_size, CandidateStatus::open), budget_(budget) {}

std::size_t ActiveKernelState::open_count() const {
  return static_cast<std::size_t>(std::count(status_.begin(), status_.end(), CandidateStatus::open));
}

std::vector<KernelId> ActiveKernelState::open_ids() const {
  std::vector<KernelId> ids;
  for (KernelId id = 0; id < status_.size(); ++id) {
    if (status_[id] == CandidateStatus::open) ids.push_back(id);
  }
  return ids;
}

void ActiveKernelState::insert(KernelId id, ConformalMap map, GramBlock gram, double beta) {
  if (id >= status_.size()) throw std::out_of_range("kernel id outside the candidate stream");
  if (status_[id] == CandidateStatus::active) throw std::logic_error("kernel is already active");
  gram.id = id;
  active_.push_back(ActiveKernel{id, std::move(map), std::move(gram), beta});
  status_[id] = CandidateStatus::active;
  peak_grams_ = std::max(peak_grams_, active_.size());
}

void ActiveKernelState::remove(std::size_t index, bool reopen) {
  status_[active_.at(index).id] = reopen ? CandidateStatus::open : CandidateStatus::forgotten;
  active_.erase(active_.begin() + static_cast<std::ptrdiff_t>(index));
}

Vector ActiveKernelState::betas() const {
  Vector beta(static_cast<Eigen::Index>(active_.size()));
  for (std::size_t m = 0; m < active_.size(); ++m) beta[static_cast<Eigen::Index>(m)] = active_[m].beta;
  return beta;
}

void ActiveKernelState::set_betas(const Vector& beta) {
  if (beta.size() != static_cast<Eigen::Index>(active_.size())) throw std::invalid_argument("weight count mismatch");
  for (std::size_t m = 0; m < active_.size(); ++m) active_[m].beta = beta[static_cast<Eigen::Index>(m)];
}

SquareMatrix ActiveKernelState::combined_gram() const { return combined_gram(betas()); }

SquareMatrix ActiveKernelState::combined_gram(const Vector& beta) const {
  if (active_.empty()) throw std::logic_error("no active kernels");
  const Eigen::Index n = active_.front().gram.values.rows();
  SquareMatrix K = SquareMatrix::Zero(n, n);
  for (std::size_t m = 0; m < active_.size(); ++m) {
    const double b = beta[static_cast<Eigen::Index>(m)];
    if (b != 0.0) K.noalias() += b * active_[m].gram.values;
  }
  return K;
}

double alignment_score(const Vector& alpha, const Vector& y, const SquareMatrix& K) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (alpha[i] > 0.0) support.push_back(i);
  }
  double total = 0.0;
  for (const Eigen::Index j : support) {
    double column = 0.0;
    for (const Eigen::Index i : support) column += alpha[i] * y[i] * K(i, j);
    total += column * alpha[j] * y[j];
  }
  return 0.5 * total;
}

double alignment_score(const DualState& dual, const Vector& y, const GramBlock& gram) {
  return alignment_score(dual.alpha, y, gram.values);
}

CandidateScorer::CandidateScorer(const Dataset& data, const DualState& dual) {
  const Eigen::Index n = data.size();
  const Eigen::Index count =
      dual.alpha.size() == n ? static_cast<Eigen::Index>((dual.alpha.array() > 0.0).count()) : Eigen::Index{0};
  support_.resize(count, data.dim());
  weights_.resize(count);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < n && r < count; ++i) {
    if (dual.alpha[i] > 0.0) {
      support_.row(r) = data.sample(i);
      weights_[r] = dual.alpha[i] * data.label(i);
      ++r;
    }
  }
}

double CandidateScorer::score(const ConformalMap& map) const {
  if (weights_.size() == 0) return 0.0;
  const Eigen::RowVectorXd w = weights_.transpose() * map.feature_map(support_);
  return 0.5 * w.squaredNorm();
}

namespace {

// Scores of the active kernels at the current dual, and the reference score
// nu over positive-weight kernels.
struct ActiveScores {
  Vector scores;
  double nu = 0.0;
};

ActiveScores active_scores(const std::vector<ActiveKernel>& active, const Vector& beta, const Vector& alpha,
                           const Vector& y, double prune_threshold) {
  ActiveScores out;
  out.scores.resize(static_cast<Eigen::Index>(active.size()));
  for (std::size_t m = 0; m < active.size(); ++m) {
    const auto idx = static_cast<Eigen::Index>(m);
    out.scores[idx] = alignment_score(alpha, y, active[m].gram.values);
    if (beta[idx] > prune_threshold) out.nu = std::max(out.nu, out.scores[idx]);
  }
  return out;
}

bool reduced_problem_optimal(const Vector& beta, const ActiveScores& s, const MklConfig& config) {
  for (Eigen::Index m = 0; m < beta.size(); ++m) {
    if (beta[m] > config.prune_threshold) {
      if (s.scores[m] < s.nu - config.equalization_tolerance(s.nu)) return false;
    } else if (s.scores[m] > config.violation_threshold(s.nu)) {
      return false;
    }
  }
  return true;
}

// Zeroes weights at or below the threshold and rescales onto the simplex.
Vector snap_to_simplex(Vector beta, double threshold) {
  for (Eigen::Index m = 0; m < beta.size(); ++m) {
    if (beta[m] <= threshold) beta[m] = 0.0;
  }
  const double total = beta.sum();
  if (total > 0.0) {
    beta /= total;
  } else {
    Eigen::Index best = 0;
    beta.maxCoeff(&best);
    beta.setZero();
    beta[best] = 1.0;
  }
  return beta;
}

}  // namespace

WeightSolveResult solve_mkl_weights(ActiveKernelState& state, const Vector& y, const MklConfig& config) {
  config.validate();
  if (state.size() == 0) throw std::invalid_argument("weight solve needs at least one active kernel");
  const SdcaConfig inner = config.inner();
  const auto M = static_cast<Eigen::Index>(state.size());

  auto solve_at = [&](const Vector& beta, const DualState& warm) {
    const SquareMatrix K = state.combined_gram(beta);
    DualState dual = sdca(y, K, inner, &warm);
    const double objective = dual_objective(dual.alpha, y, K);
    return std::pair{std::move(dual), objective};
  };

  WeightSolveResult result;
  Vector beta = M == 1 ? Vector::Ones(1) : snap_to_simplex(state.betas(), config.prune_threshold);
  auto [dual, objective] = solve_at(beta, state.dual);

  if (M == 1) {
    result.converged = true;
  } else {
    for (; result.iterations < config.max_weight_iterations; ++result.iterations) {
      const ActiveScores s = active_scores(state.active(), beta, dual.alpha, y, config.prune_threshold);
      if (reduced_problem_optimal(beta, s, config)) {
        result.converged = true;
        break;
      }

      // dJ/dbeta_m = -score_m; reduce against the largest weight.
      Eigen::Index pivot = 0;
      beta.maxCoeff(&pivot);
      Vector direction = Vector::Zero(M);
      for (Eigen::Index m = 0; m < M; ++m) {
        if (m == pivot) continue;
        const double reduced = s.scores[pivot] - s.scores[m];
        if (beta[m] == 0.0 && reduced > 0.0) continue;
        direction[m] = -reduced;
      }
      direction[pivot] = -direction.sum();
      const double slope = -s.scores.dot(direction);
      if (!(slope < 0.0)) {
        result.converged = true;
        break;
      }

      double max_step = std::numeric_limits<double>::infinity();
      Eigen::Index blocking = -1;
      for (Eigen::Index m = 0; m < M; ++m) {
        if (direction[m] < 0.0 && -beta[m] / direction[m] < max_step) {
          max_step = -beta[m] / direction[m];
          blocking = m;
        }
      }

      bool accepted = false;
      double step = max_step;
      Vector trial;
      DualState trial_dual;
      double trial_objective = 0.0;
      for (int ls = 0; ls < config.max_line_search_steps; ++ls, step *= 0.5) {
        trial = (beta + step * direction).cwiseMax(0.0);
        if (ls == 0 && blocking >= 0) trial[blocking] = 0.0;
        trial = snap_to_simplex(std::move(trial), 0.0);
        if (config.resolve_in_line_search) {
          std::tie(trial_dual, trial_objective) = solve_at(trial, dual);
        } else {
          trial_dual = dual;
          trial_objective = dual.alpha.sum() - trial.dot(s.scores);
        }
        if (trial_objective <= objective + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        result.stalled = true;
        break;
      }
      beta = std::move(trial);
      if (config.resolve_in_line_search) {
        dual = std::move(trial_dual);
        objective = trial_objective;
      } else {
        std::tie(dual, objective) = solve_at(beta, dual);
      }
    }
  }

  state.set_betas(beta);
  state.dual = std::move(dual);
  result.objective = objective;
  return result;
}

ProbeResult probe_and_insert(ActiveKernelState& state, const CandidateStream& candidates, const Dataset& data,
                             const MklConfig& config) {
  config.validate();
  ProbeResult result;
  const Vector& y = data.labels();
  if (state.dual.alpha.size() == data.size()) {
    for (const auto& kernel : state.active()) {
      if (kernel.beta > config.prune_threshold) {
        result.reference = std::max(result.reference, alignment_score(state.dual, y, kernel.gram));
      }
    }
  }
  const double threshold = config.violation_threshold(result.reference);

  const CandidateScorer scorer(data, state.dual);
  std::vector<std::pair<double, KernelId>> violators;
  for (KernelId id = 0; id < candidates.size(); ++id) {
    if (state.status(id) != CandidateStatus::open) continue;
    ++result.probed;
    const double score = scorer.score(candidates.at(id));
    result.best_score = std::max(result.best_score, score);
    if (score > threshold) violators.emplace_back(score, id);
  }
  result.violators = violators.size();

  const std::size_t take = std::min(config.batch, violators.size());
  std::partial_sort(violators.begin(), violators.begin() + static_cast<std::ptrdiff_t>(take), violators.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });

  for (std::size_t k = 0; k < take; ++k) {
    const KernelId id = violators[k].second;
    if (state.size() >= state.budget()) {
      // Evict the lightest zero-weight kernel that was not inserted in this round.
      std::size_t victim = state.size();
      for (std::size_t m = 0; m < state.size(); ++m) {
        const auto& kernel = state.active()[m];
        if (kernel.beta > config.prune_threshold) continue;
        const bool fresh = std::any_of(violators.begin(), violators.begin() + static_cast<std::ptrdiff_t>(k),
                                       [&](const auto& v) { return v.second == kernel.id; });
        if (fresh) continue;
        if (victim == state.size() || kernel.beta < state.active()[victim].beta) victim = m;
      }
      if (victim == state.size()) {
        result.budget_blocked = true;
        break;
      }
      state.remove(victim, config.reprocess);
    }
    ConformalMap map = candidates.at(id);
    GramBlock block = gram(map, data, id);
    state.insert(id, std::move(map), std::move(block), 0.0);
    ++result.inserted;
  }
  return result;
}

std::size_t prune(ActiveKernelState& state, const MklConfig& config) {
  std::size_t removed = 0;
  if (state.size() == 0) return removed;

  std::size_t keep = 0;
  for (std::size_t m = 1; m < state.size(); ++m) {
    if (state.active()[m].beta > state.active()[keep].beta) keep = m;
  }
  const KernelId keep_id = state.active()[keep].id;
  for (std::size_t m = state.size(); m-- > 0;) {
    const auto& kernel = state.active()[m];
    if (kernel.id != keep_id && kernel.beta <= config.prune_threshold) {
      state.remove(m, config.reprocess);
      ++removed;
    }
  }
  while (state.size() > state.budget()) {
    std::size_t lightest = 0;
    for (std::size_t m = 1; m < state.size(); ++m) {
      if (state.active()[m].beta < state.active()[lightest].beta) lightest = m;
    }
    state.remove(lightest, config.reprocess);
    ++removed;
  }
  if (removed > 0) {
    Vector beta = state.betas();
    const double total = beta.sum();
    if (total > 0.0) {
      beta /= total;
    } else {
      beta.setConstant(1.0 / static_cast<double>(beta.size()));
    }
    state.set_betas(beta);
  }
  return removed;
}

KktReport kkt_report(const ActiveKernelState& state, const CandidateStream& candidates, const Dataset& data,
                     const MklConfig& config) {
  KktReport report;
  const Vector& y = data.labels();
  const Vector alpha = state.dual.alpha.size() == data.size() ? state.dual.alpha : Vector::Zero(data.size());
  const ActiveScores s = active_scores(state.active(), state.betas(), alpha, y, config.prune_threshold);
  report.nu = s.nu;
  report.active_equalized = true;
  for (std::size_t m = 0; m < state.size(); ++m) {
    const auto& kernel = state.active()[m];
    const double score = s.scores[static_cast<Eigen::Index>(m)];
    report.active.push_back(KernelScore{kernel.id, kernel.beta, score, s.nu - score});
    if (kernel.beta > config.prune_threshold) {
      const double gap = std::abs(score - s.nu);
      report.max_active_gap = std::max(report.max_active_gap, gap);
      if (gap > config.equalization_tolerance(s.nu)) report.active_equalized = false;
    } else if (score > config.violation_threshold(s.nu)) {
      report.active_equalized = false;
    }
  }

  DualState dual;
  dual.alpha = alpha;
  const CandidateScorer scorer(data, dual);
  const double threshold = config.violation_threshold(s.nu);
  for (KernelId id = 0; id < candidates.size(); ++id) {
    if (state.status(id) == CandidateStatus::forgotten) report.forgotten.push_back(id);
    if (state.status(id) != CandidateStatus::open) continue;
    ++report.probed;
    const double score = scorer.score(candidates.at(id));
    report.max_open_score = std::max(report.max_open_score, score);
    if (score > threshold) report.violators.push_back(KernelScore{id, 0.0, score, s.nu - score});
  }
  report.open_satisfied = report.violators.empty();
  return report;
}

MklResult sequential_mkl(const Dataset& data, const CandidateStream& candidates, const MklConfig& config,
                         const IterationSink& sink) {
  config.validate();
  if (candidates.size() == 0) throw std::invalid_argument("candidate stream is empty");
  const Vector& y = data.labels();
  const SdcaConfig inner = config.inner();

  ActiveKernelState state(candidates.size(), config.budget);
  {
    ConformalMap first = candidates.at(0);
    GramBlock block = gram(first, data, 0);
    state.insert(0, std::move(first), std::move(block), 1.0);
  }

  MklResult result;
  bool dual_fresh = false;
  for (int outer = 1; outer <= config.max_outer_iterations; ++outer) {
    IterationLog log;
    log.iteration = outer;
    result.outer_iterations = outer;

    const SquareMatrix K = state.combined_gram();
    state.dual = sdca(y, K, inner, &state.dual);
    log.objective_before = dual_objective(state.dual.alpha, y, K);
    dual_fresh = true;

    const ProbeResult probe = probe_and_insert(state, candidates, data, config);
    log.inserted = probe.inserted;
    log.reference = probe.reference;
    log.best_open_score = probe.best_score;
    log.budget_blocked = probe.budget_blocked;

    bool done = false;
    if (probe.inserted == 0 && !probe.budget_blocked) {
      const Vector beta = state.betas();
      done = reduced_problem_optimal(beta, active_scores(state.active(), beta, state.dual.alpha, y, config.prune_threshold),
                                     config);
    }
    if (done) {
      log.objective = log.objective_before;
    } else {
      const WeightSolveResult weights = solve_mkl_weights(state, y, config);
      log.objective = weights.objective;
      log.weight_iterations = weights.iterations;
      log.pruned = prune(state, config);
      dual_fresh = log.pruned == 0;
      if (probe.budget_blocked && probe.inserted == 0 && log.pruned == 0) {
        result.budget_saturated = true;
        done = true;
      }
    }

    const Vector beta = state.betas();
    log.active = state.size();
    log.open = state.open_count();
    log.beta_sum = beta.sum();
    log.beta_min = beta.minCoeff();
    log.live_grams = state.live_grams();
    log.peak_grams = state.peak_grams();
    if (sink) sink(log);
    if (done) break;
  }

  const SquareMatrix K = state.combined_gram();
  if (!dual_fresh) state.dual = sdca(y, K, inner, &state.dual);
  result.objective = dual_objective(state.dual.alpha, y, K);
  result.report = kkt_report(state, candidates, data, config);
  result.converged = result.report.certified();
  result.peak_grams = state.peak_grams();
  result.dual = state.dual;
  for (const auto& kernel : state.active()) {
    if (kernel.beta > config.prune_threshold) result.kernels.push_back(SelectedKernel{kernel.id, kernel.map, kernel.beta});
  }
  return result;
}

}  // namespace mllkm
