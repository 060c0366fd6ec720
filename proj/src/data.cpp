#include "mllkm/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string_view>

namespace mllkm {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::optional<double> parse_number(std::string_view token) {
  while (!token.empty() && std::isspace(static_cast<unsigned char>(token.front()))) token.remove_prefix(1);
  while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back()))) token.remove_suffix(1);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return std::nullopt;
  double value = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  return in;
}

// Two distinct raw labels: the smaller maps to -1. A single raw label keeps its sign.
Vector canonical_labels(const std::vector<double>& raw, const std::filesystem::path& path) {
  const std::set<double> distinct(raw.begin(), raw.end());
  if (distinct.size() > 2) {
    throw DataError(path.string() + ": expected a binary problem, found " +
                    std::to_string(distinct.size()) + " distinct labels");
  }
  const double low = *distinct.begin();
  Vector labels(static_cast<Eigen::Index>(raw.size()));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (distinct.size() == 2) {
      labels[static_cast<Eigen::Index>(i)] = raw[i] == low ? -1.0 : 1.0;
    } else {
      labels[static_cast<Eigen::Index>(i)] = raw[i] > 0.0 ? 1.0 : -1.0;
    }
  }
  return labels;
}

std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const auto cell = std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      const auto value = parse_number(cell);
      if (!value) {
        throw DataError(where(path, line_no) + "non-numeric cell '" + std::string(cell) + "' in column " +
                        std::to_string(row.size()));
      }
      row.push_back(*value);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(where(path, line_no) + "ragged row: " + std::to_string(row.size()) + " cells, expected " +
                      std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": empty file");
  return rows;
}

}  // namespace

Dataset::Dataset(Matrix features, Vector labels) : features_(std::move(features)), labels_(std::move(labels)) {
  if (features_.rows() < 1) throw std::invalid_argument("dataset needs at least one sample");
  if (features_.cols() < 1) throw std::invalid_argument("dataset needs at least one dimension");
  if (labels_.size() != features_.rows()) {
    throw std::invalid_argument("label count " + std::to_string(labels_.size()) + " does not match sample count " +
                                std::to_string(features_.rows()));
  }
  for (Eigen::Index i = 0; i < labels_.size(); ++i) {
    if (labels_[i] != 1.0 && labels_[i] != -1.0) {
      throw std::invalid_argument("label at row " + std::to_string(i) + " is not -1 or +1");
    }
  }
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Matrix x(static_cast<Eigen::Index>(rows.size()), dim());
  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = features_.row(rows[r]);
    y[static_cast<Eigen::Index>(r)] = labels_[rows[r]];
  }
  return Dataset(std::move(x), std::move(y));
}

Matrix ScalerParams::apply(const Matrix& x) const {
  return ((x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

Vector ScalerParams::apply(const Eigen::Ref<const Vector>& x) const {
  return ((x - mean).array() / scale.array()).matrix();
}

Matrix ScalerParams::invert(const Matrix& z) const {
  return ((z.array().rowwise() * scale.transpose().array()).rowwise() + mean.transpose().array()).matrix();
}

Dataset load_libsvm(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<double> raw_labels;
  std::vector<std::vector<std::pair<Eigen::Index, double>>> rows;
  Eigen::Index dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string token;
    if (!(tokens >> token)) continue;
    const auto label = parse_number(token);
    if (!label) throw DataError(where(path, line_no) + "bad label '" + token + "'");
    std::vector<std::pair<Eigen::Index, double>> entries;
    long long previous = 0;
    while (tokens >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) throw DataError(where(path, line_no) + "expected index:value, got '" + token + "'");
      long long index = 0;
      const auto* idx_end = token.data() + colon;
      const auto [ptr, ec] = std::from_chars(token.data(), idx_end, index);
      if (ec != std::errc{} || ptr != idx_end || index < 1) {
        throw DataError(where(path, line_no) + "bad feature index in '" + token + "'");
      }
      if (index <= previous) {
        throw DataError(where(path, line_no) + "feature indices must be strictly increasing");
      }
      const auto value = parse_number(std::string_view(token).substr(colon + 1));
      if (!value) throw DataError(where(path, line_no) + "bad feature value in '" + token + "'");
      previous = index;
      entries.emplace_back(static_cast<Eigen::Index>(index - 1), *value);
      dim = std::max(dim, static_cast<Eigen::Index>(index));
    }
    raw_labels.push_back(*label);
    rows.push_back(std::move(entries));
  }
  if (rows.empty()) throw DataError(path.string() + ": empty file");
  if (dim == 0) throw DataError(path.string() + ": no features found");

  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [col, value] : rows[r]) x(static_cast<Eigen::Index>(r), col) = value;
  }
  return Dataset(std::move(x), canonical_labels(raw_labels, path));
}

Dataset load_csv(const std::filesystem::path& path, std::size_t label_column) {
  const auto rows = read_csv_rows(path);
  const std::size_t width = rows.front().size();
  if (label_column >= width) {
    throw DataError(path.string() + ": label column " + std::to_string(label_column) + " out of range (" +
                    std::to_string(width) + " columns)");
  }
  if (width < 2) throw DataError(path.string() + ": need at least one feature column besides the label");
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
  std::vector<double> raw_labels;
  raw_labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < width; ++j) {
      if (j == label_column) {
        raw_labels.push_back(rows[r][j]);
      } else {
        x(static_cast<Eigen::Index>(r), c++) = rows[r][j];
      }
    }
  }
  return Dataset(std::move(x), canonical_labels(raw_labels, path));
}

Matrix load_csv_features(const std::filesystem::path& path) {
  const auto rows = read_csv_rows(path);
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < rows[r].size(); ++j) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
    }
  }
  return x;
}

void save_libsvm(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out << (data.label(i) > 0 ? "+1" : "-1");
    for (Eigen::Index j = 0; j < data.dim(); ++j) {
      const double v = data.features()(i, j);
      if (v != 0.0) out << ' ' << (j + 1) << ':' << v;
    }
    out << '\n';
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

std::pair<Dataset, ScalerParams> standardize(const Dataset& train) {
  const Matrix& x = train.features();
  ScalerParams params;
  params.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - params.mean.transpose();
  params.scale = (centered.array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt().transpose();
  for (Eigen::Index j = 0; j < params.scale.size(); ++j) {
    if (!(params.scale[j] > 0.0)) params.scale[j] = 1.0;
  }
  return {Dataset(params.apply(x), train.labels()), std::move(params)};
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
  const Eigen::Index n = data.size();
  const auto n_train = static_cast<Eigen::Index>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) {
    throw std::invalid_argument("train fraction " + std::to_string(train_fraction) + " with n=" + std::to_string(n) +
                                " leaves an empty part");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<Eigen::Index> train_rows(order.begin(), order.begin() + n_train);
  std::vector<Eigen::Index> test_rows(order.begin() + n_train, order.end());
  return {data.subset(train_rows), data.subset(test_rows)};
}

double PiecewiseBoundary::operator()(double x) const {
  if (x <= knot_x.front()) return knot_y.front();
  if (x >= knot_x.back()) return knot_y.back();
  const auto upper = std::upper_bound(knot_x.begin(), knot_x.end(), x);
  const auto k = static_cast<std::size_t>(upper - knot_x.begin());
  const double t = (x - knot_x[k - 1]) / (knot_x[k] - knot_x[k - 1]);
  return knot_y[k - 1] + t * (knot_y[k] - knot_y[k - 1]);
}

double PiecewiseBoundary::label(double x, double y) const { return y > (*this)(x) ? 1.0 : -1.0; }

SyntheticTask gen_piecewise_task(Eigen::Index n, int num_segments, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("gen_piecewise needs n >= 2");
  if (num_segments < 1) throw std::invalid_argument("gen_piecewise needs at least one segment");
  Rng rng(seed);

  auto draw_boundary = [&] {
    PiecewiseBoundary b;
    const bool start_low = rng.uniform() < 0.5;
    for (int k = 0; k <= num_segments; ++k) {
      b.knot_x.push_back(static_cast<double>(k) / num_segments);
      const bool low = (k % 2 == 0) == start_low;
      b.knot_y.push_back(low ? rng.uniform(0.15, 0.4) : rng.uniform(0.6, 0.85));
    }
    return b;
  };

  PiecewiseBoundary boundary;
  Matrix x(n, 2);
  Vector y(n);
  // Points are redrawn only when many boundaries in a row fail to split them
  // (possible for tiny n with every point outside the knot bands).
  for (int attempt = 0;; ++attempt) {
    boundary = draw_boundary();
    if (attempt % 16 == 0) {
      for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform();
        x(i, 1) = rng.uniform();
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) y[i] = boundary.label(x(i, 0), x(i, 1));
    if ((y.array() > 0).any() && (y.array() < 0).any()) break;
  }
  return {Dataset(std::move(x), std::move(y)), std::move(boundary)};
}

Dataset gen_piecewise(Eigen::Index n, int num_segments, std::uint64_t seed) {
  return gen_piecewise_task(n, num_segments, seed).data;
}

}  // namespace mllkm
