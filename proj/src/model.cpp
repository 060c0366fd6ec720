#include "mllkm/model.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mllkm {

using nlohmann::json;

MllkmModel::MllkmModel(Eigen::Index dim, std::vector<Anchor> anchors, std::optional<ScalerParams> scaler,
                       TrainingInfo info)
    : dim_(dim), anchors_(std::move(anchors)), scaler_(std::move(scaler)), info_(info) {
  if (dim_ < 1) throw ModelError("model dimension must be >= 1");
  for (const auto& anchor : anchors_) {
    if (anchor.map.dim() != dim_ || anchor.w.size() != dim_) {
      throw ModelError("anchor dimension does not match model dimension " + std::to_string(dim_));
    }
  }
  if (scaler_ && (scaler_->mean.size() != dim_ || scaler_->scale.size() != dim_)) {
    throw ModelError("scaler dimension does not match model dimension " + std::to_string(dim_));
  }
}

double MllkmModel::score_scaled(const Eigen::Ref<const Eigen::RowVectorXd>& z, std::size_t* map_evaluations) const {
  if (z.size() != dim_) {
    throw std::invalid_argument("dimension mismatch: sample has " + std::to_string(z.size()) +
                                " coordinates, model expects " + std::to_string(dim_));
  }
  double total = 0.0;
  for (const auto& anchor : anchors_) {
    total += anchor.map.feature_map(z).dot(anchor.w.transpose());
  }
  if (map_evaluations != nullptr) *map_evaluations += anchors_.size();
  return total;
}

double MllkmModel::score(const Eigen::Ref<const Eigen::RowVectorXd>& x, std::size_t* map_evaluations) const {
  if (x.size() != dim_) {
    throw std::invalid_argument("dimension mismatch: sample has " + std::to_string(x.size()) +
                                " coordinates, model expects " + std::to_string(dim_));
  }
  if (!scaler_) return score_scaled(x, map_evaluations);
  const Eigen::RowVectorXd z = ((x - scaler_->mean.transpose()).array() / scaler_->scale.transpose().array()).matrix();
  return score_scaled(z, map_evaluations);
}

Vector MllkmModel::scores(const Matrix& x) const {
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = score(x.row(i));
  return out;
}

MllkmModel compress(const DualState& dual, const Dataset& data, const std::vector<SelectedKernel>& kernels,
                    std::optional<ScalerParams> scaler, TrainingInfo info) {
  if (dual.alpha.size() != data.size()) throw std::invalid_argument("compress: dual size does not match data");
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (dual.alpha[i] > 0.0) support.push_back(i);
  }
  Matrix xs(static_cast<Eigen::Index>(support.size()), data.dim());
  Vector coef(static_cast<Eigen::Index>(support.size()));
  for (std::size_t r = 0; r < support.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    xs.row(row) = data.sample(support[r]);
    coef[row] = dual.alpha[support[r]] * data.label(support[r]);
  }

  std::vector<Anchor> anchors;
  anchors.reserve(kernels.size());
  for (const auto& kernel : kernels) {
    Vector w = Vector::Zero(data.dim());
    if (!support.empty()) w = kernel.beta * (kernel.map.feature_map(xs).transpose() * coef);
    anchors.push_back(Anchor{kernel.map, std::move(w)});
  }
  info.selected_kernels = kernels.size();
  info.support_vectors = support.size();
  info.training_samples = static_cast<std::size_t>(data.size());
  return MllkmModel(data.dim(), std::move(anchors), std::move(scaler), info);
}

double dual_expansion_score(const DualState& dual, const Dataset& data, const std::vector<SelectedKernel>& kernels,
                            const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (!(dual.alpha[i] > 0.0)) continue;
    double k = 0.0;
    for (const auto& kernel : kernels) k += kernel.beta * kernel.map.kernel(data.sample(i), z);
    total += dual.alpha[i] * data.label(i) * k;
  }
  return total;
}

namespace {

json to_array(const Vector& v, const char* what) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw ModelError(std::string("non-finite value in ") + what);
    out.push_back(v[i]);
  }
  return out;
}

Vector from_array(const json& node, Eigen::Index expected, const std::string& what) {
  if (!node.is_array()) throw ModelError("schema violation: '" + what + "' must be an array");
  if (static_cast<Eigen::Index>(node.size()) != expected) {
    throw ModelError("schema violation: '" + what + "' has " + std::to_string(node.size()) + " entries, expected " +
                     std::to_string(expected));
  }
  Vector v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    const auto& item = node[static_cast<std::size_t>(i)];
    if (!item.is_number()) throw ModelError("schema violation: '" + what + "' holds a non-numeric entry");
    v[i] = item.get<double>();
    if (!std::isfinite(v[i])) throw ModelError("non-finite value in '" + what + "'");
  }
  return v;
}

const json& field(const json& node, const char* key) {
  const auto it = node.find(key);
  if (it == node.end()) throw ModelError(std::string("schema violation: missing field '") + key + "'");
  return *it;
}

}  // namespace

std::string model_to_json(const MllkmModel& model) {
  json doc;
  doc["format"] = "mllkm-model";
  doc["version"] = MllkmModel::kFormatVersion;
  doc["dimension"] = model.dim();
  doc["scope"] = model.anchors().empty() ? std::string("global")
                                         : std::string(to_string(model.anchors().front().map.scope()));
  json anchors = json::array();
  for (const auto& anchor : model.anchors()) {
    if (!std::isfinite(anchor.map.gamma())) throw ModelError("non-finite gamma");
    anchors.push_back({{"family", to_string(anchor.map.family())},
                       {"scope", to_string(anchor.map.scope())},
                       {"gamma", anchor.map.gamma()},
                       {"center", to_array(anchor.map.center(), "center")},
                       {"w", to_array(anchor.w, "w")}});
  }
  doc["anchors"] = std::move(anchors);
  if (model.scaler()) {
    doc["scaler"] = {{"mean", to_array(model.scaler()->mean, "scaler mean")},
                     {"scale", to_array(model.scaler()->scale, "scaler scale")}};
  } else {
    doc["scaler"] = nullptr;
  }
  const auto& info = model.info();
  if (!std::isfinite(info.C) || !std::isfinite(info.objective)) throw ModelError("non-finite training metadata");
  doc["metadata"] = {{"C", info.C},
                     {"seed", info.seed},
                     {"converged", info.converged},
                     {"selected_kernels", info.selected_kernels},
                     {"support_vectors", info.support_vectors},
                     {"training_samples", info.training_samples},
                     {"objective", info.objective}};
  return doc.dump(1);
}

MllkmModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object()) throw ModelError("schema violation: model must be a JSON object");
    const auto& version = field(doc, "version");
    if (!version.is_number_integer() || version.get<int>() != MllkmModel::kFormatVersion) {
      throw ModelError("unsupported model version: expected " + std::to_string(MllkmModel::kFormatVersion) +
                       ", found " + version.dump());
    }
    const auto& dim_node = field(doc, "dimension");
    if (!dim_node.is_number_integer() || dim_node.get<long long>() < 1) {
      throw ModelError("schema violation: 'dimension' must be a positive integer");
    }
    const auto dim = static_cast<Eigen::Index>(dim_node.get<long long>());
    const Scope default_scope = parse_scope(field(doc, "scope").get<std::string>());

    std::vector<Anchor> anchors;
    const auto& anchor_nodes = field(doc, "anchors");
    if (!anchor_nodes.is_array()) throw ModelError("schema violation: 'anchors' must be an array");
    for (const auto& node : anchor_nodes) {
      const Family family = parse_family(field(node, "family").get<std::string>());
      const Scope scope = node.contains("scope") ? parse_scope(node["scope"].get<std::string>()) : default_scope;
      const auto& gamma = field(node, "gamma");
      if (!gamma.is_number()) throw ModelError("schema violation: 'gamma' must be a number");
      ConformalMap map(family, scope, gamma.get<double>(), from_array(field(node, "center"), dim, "center"));
      anchors.push_back(Anchor{std::move(map), from_array(field(node, "w"), dim, "w")});
    }

    std::optional<ScalerParams> scaler;
    const auto& scaler_node = field(doc, "scaler");
    if (!scaler_node.is_null()) {
      ScalerParams params{from_array(field(scaler_node, "mean"), dim, "scaler.mean"),
                          from_array(field(scaler_node, "scale"), dim, "scaler.scale")};
      if ((params.scale.array() <= 0.0).any()) throw ModelError("schema violation: scaler scale must be positive");
      scaler = std::move(params);
    }

    TrainingInfo info;
    if (const auto it = doc.find("metadata"); it != doc.end() && it->is_object()) {
      const auto& meta = *it;
      info.C = meta.value("C", 0.0);
      info.seed = meta.value("seed", std::uint64_t{0});
      info.converged = meta.value("converged", false);
      info.selected_kernels = meta.value("selected_kernels", anchors.size());
      info.support_vectors = meta.value("support_vectors", std::size_t{0});
      info.training_samples = meta.value("training_samples", std::size_t{0});
      info.objective = meta.value("objective", 0.0);
    }
    return MllkmModel(dim, std::move(anchors), std::move(scaler), info);
  } catch (const json::exception& e) {
    throw ModelError(std::string("schema violation: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelError(std::string("schema violation: ") + e.what());
  }
}

void save_model(const MllkmModel& model, const std::filesystem::path& path) {
  const std::string text = model_to_json(model);
  std::ofstream out(path);
  if (!out) throw ModelError(path.string() + ": cannot open for writing");
  out << text << '\n';
  if (!out) throw ModelError(path.string() + ": write failed");
}

MllkmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(path.string() + ": cannot open model file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return model_from_json(buffer.str());
  } catch (const ModelError& e) {
    throw ModelError(path.string() + ": " + e.what());
  }
}

}  // namespace mllkm
