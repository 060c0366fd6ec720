#include "mllkm/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace mllkm {

std::string_view to_string(Family family) {
  switch (family) {
    case Family::exp: return "exp";
    case Family::gauss: return "gauss";
    case Family::linear: return "linear";
    case Family::square: return "square";
  }
  return "?";
}

std::string_view to_string(Scope scope) { return scope == Scope::global ? "global" : "componentwise"; }

Family parse_family(std::string_view name) {
  if (name == "exp") return Family::exp;
  if (name == "gauss") return Family::gauss;
  if (name == "linear") return Family::linear;
  if (name == "square") return Family::square;
  throw std::invalid_argument("unknown map family '" + std::string(name) + "' (expected exp|gauss|linear|square)");
}

Scope parse_scope(std::string_view name) {
  if (name == "global") return Scope::global;
  if (name == "componentwise" || name == "component") return Scope::componentwise;
  throw std::invalid_argument("unknown map scope '" + std::string(name) + "' (expected global|component)");
}

double conformal_weight(Family family, double gamma, double distance) {
  switch (family) {
    case Family::exp: return std::exp(-gamma * distance);
    case Family::gauss: return std::exp(-gamma * distance * distance);
    case Family::linear: return std::max(0.0, 1.0 - gamma * distance);
    case Family::square: return std::max(0.0, 1.0 - gamma * distance * distance);
  }
  return 0.0;
}

namespace {

template <typename Array>
Array weight_array(Family family, double gamma, const Array& distance) {
  switch (family) {
    case Family::exp: return (-gamma * distance).exp();
    case Family::gauss: return (-gamma * distance.square()).exp();
    case Family::linear: return (1.0 - gamma * distance).max(0.0);
    case Family::square: return (1.0 - gamma * distance.square()).max(0.0);
  }
  return Array::Zero(distance.rows(), distance.cols());
}

}  // namespace

ConformalMap::ConformalMap(Family family, Scope scope, double gamma, Vector center)
    : family_(family), scope_(scope), gamma_(gamma), center_(std::move(center)) {
  if (!(gamma_ > 0.0) || !std::isfinite(gamma_)) throw std::invalid_argument("conformal map bandwidth must be > 0");
  if (center_.size() < 1) throw std::invalid_argument("conformal map center must have dimension >= 1");
}

void ConformalMap::check_dim(Eigen::Index d) const {
  if (d != center_.size()) {
    throw std::invalid_argument("dimension mismatch: input has " + std::to_string(d) + " coordinates, map center has " +
                                std::to_string(center_.size()));
  }
}

double ConformalMap::weight(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (scope_ != Scope::global) throw std::logic_error("scalar weight requested from a componentwise map");
  check_dim(x.size());
  return conformal_weight(family_, gamma_, (x - center_.transpose()).norm());
}

Eigen::RowVectorXd ConformalMap::weights(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  check_dim(x.size());
  const Eigen::RowVectorXd diff = x - center_.transpose();
  if (scope_ == Scope::global) {
    return Eigen::RowVectorXd::Constant(diff.size(), conformal_weight(family_, gamma_, diff.norm()));
  }
  return weight_array(family_, gamma_, diff.array().abs().eval()).matrix();
}

Eigen::RowVectorXd ConformalMap::feature_map(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  check_dim(x.size());
  const Eigen::RowVectorXd diff = x - center_.transpose();
  if (scope_ == Scope::global) return conformal_weight(family_, gamma_, diff.norm()) * diff;
  return (weight_array(family_, gamma_, diff.array().abs().eval()) * diff.array()).matrix();
}

Matrix ConformalMap::feature_map(const Matrix& x) const {
  check_dim(x.cols());
  const Matrix diff = x.rowwise() - center_.transpose();
  if (scope_ == Scope::global) {
    const Eigen::ArrayXd h = weight_array(family_, gamma_, diff.rowwise().norm().array().eval());
    return (diff.array().colwise() * h).matrix();
  }
  return (weight_array(family_, gamma_, diff.array().abs().eval()) * diff.array()).matrix();
}

double ConformalMap::kernel(const Eigen::Ref<const Eigen::RowVectorXd>& x1,
                            const Eigen::Ref<const Eigen::RowVectorXd>& x2) const {
  return feature_map(x1).dot(feature_map(x2));
}

Eigen::RowVectorXd eval_map(const ConformalMap& map, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (map.scope() == Scope::global) return Eigen::RowVectorXd::Constant(1, map.weight(x));
  return map.weights(x);
}

Eigen::RowVectorXd feature_map(const ConformalMap& map, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return map.feature_map(x);
}

double kernel_eval(const ConformalMap& map, const Eigen::Ref<const Eigen::RowVectorXd>& x1,
                   const Eigen::Ref<const Eigen::RowVectorXd>& x2) {
  return map.kernel(x1, x2);
}

SquareMatrix gram_matrix(const ConformalMap& map, const Matrix& x) {
  const Matrix phi = map.feature_map(x);
  SquareMatrix g = SquareMatrix::Zero(x.rows(), x.rows());
  g.selfadjointView<Eigen::Upper>().rankUpdate(phi);
  g.triangularView<Eigen::StrictlyLower>() = g.transpose();
  return g;
}

GramBlock gram(const ConformalMap& map, const Dataset& data, KernelId id) {
  return GramBlock{id, gram_matrix(map, data.features())};
}

GramBlock combined_gram(std::span<const std::pair<ConformalMap, double>> active, const Dataset& data) {
  GramBlock out;
  out.values = SquareMatrix::Zero(data.size(), data.size());
  for (const auto& [map, beta] : active) {
    if (!(beta >= 0.0)) throw std::invalid_argument("kernel weights must be non-negative");
    if (beta == 0.0) continue;
    out.values += beta * gram_matrix(map, data.features());
  }
  return out;
}

std::vector<double> log_gamma_grid(double lo, double hi, int count) {
  if (count < 1) throw std::invalid_argument("gamma grid needs at least one value");
  if (!(lo > 0.0) || !(hi > 0.0)) throw std::invalid_argument("gamma grid endpoints must be positive");
  if (count == 1) return {lo};
  if (!(hi > lo)) throw std::invalid_argument("gamma grid upper end must exceed the lower end");
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int k = 0; k < count; ++k) grid[static_cast<std::size_t>(k)] = std::pow(10.0, a + (b - a) * k / (count - 1));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

void CandidateSpec::validate() const {
  if (gamma_grid.empty()) throw std::invalid_argument("gamma grid must not be empty");
  for (std::size_t k = 0; k < gamma_grid.size(); ++k) {
    if (!(gamma_grid[k] > 0.0)) throw std::invalid_argument("gamma grid values must be positive");
    if (k > 0 && !(gamma_grid[k] > gamma_grid[k - 1])) {
      throw std::invalid_argument("gamma grid must be strictly increasing");
    }
  }
}

CandidateStream::CandidateStream(const Dataset& data, CandidateSpec spec)
    : anchors_(data.features()), spec_(std::move(spec)) {
  spec_.validate();
}

Eigen::Index CandidateStream::anchor_of(KernelId id) const {
  return static_cast<Eigen::Index>(id / spec_.gamma_grid.size());
}

double CandidateStream::gamma_of(KernelId id) const { return spec_.gamma_grid[id % spec_.gamma_grid.size()]; }

ConformalMap CandidateStream::at(KernelId id) const {
  if (id >= size()) throw std::out_of_range("candidate id " + std::to_string(id) + " past end of stream");
  return ConformalMap(spec_.family, spec_.scope, gamma_of(id), anchors_.row(anchor_of(id)).transpose());
}

}  // namespace mllkm
