#include "lbe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "lbe/rng.hpp"

namespace lbe {

Matrix2D Dataset::one_hot() const {
  Matrix2D y(size(), static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < size(); ++i) y.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  return y;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

void Dataset::validate() const {
  if (features.rows() != labels.size() || labels.size() != ids.size())
    throw ShapeError("Dataset: rows, labels and ids must agree");
  if (n_classes <= 0) throw DataError("Dataset: no classes");
  for (int l : labels)
    if (l < 0 || l >= n_classes) throw DataError("Dataset: label out of range");
  std::set<std::size_t> seen(ids.begin(), ids.end());
  if (seen.size() != ids.size()) throw ContractError("Dataset: duplicate ids");
  for (std::size_t c : class_counts())
    if (c == 0) throw DataError("Dataset: empty class");
}

Dataset subset(const Dataset& d, const std::vector<std::size_t>& rows) {
  Dataset s;
  s.features = Matrix2D(rows.size(), d.dim());
  s.n_classes = d.n_classes;
  s.labels.reserve(rows.size());
  s.ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (r >= d.size()) throw RangeError("subset: row index out of range");
    std::copy_n(d.features.row(r).data(), d.dim(), s.features.row(i).data());
    s.labels.push_back(d.labels[r]);
    s.ids.push_back(d.ids[r]);
  }
  return s;
}

Dataset gen_blobs(int n_classes, int per_class, int dim, double spread, std::uint64_t seed) {
  if (n_classes < 2 || per_class < 1 || dim < 1)
    throw DataError("gen_blobs: need n_classes >= 2, per_class >= 1, dim >= 1");
  if (spread < 0) throw DataError("gen_blobs: negative spread");
  Rng rng = Rng::stream(seed, "data");
  const double spacing = std::max(4.0 * spread, 1.0);
  Matrix2D means(static_cast<std::size_t>(n_classes), static_cast<std::size_t>(dim));
  if (dim == 1) {
    for (int c = 0; c < n_classes; ++c) means.at(c, 0) = spacing * c;
  } else {
    // Circle in the first two dims; adjacent chord length = spacing, which
    // is the minimum pairwise distance.
    const double radius =
        spacing / (2.0 * std::sin(std::numbers::pi / static_cast<double>(n_classes)));
    for (int c = 0; c < n_classes; ++c) {
      const double ang = 2.0 * std::numbers::pi * c / n_classes;
      means.at(c, 0) = radius * std::cos(ang);
      means.at(c, 1) = radius * std::sin(ang);
    }
  }
  Dataset d;
  d.n_classes = n_classes;
  const std::size_t n = static_cast<std::size_t>(n_classes) * per_class;
  d.features = Matrix2D(n, static_cast<std::size_t>(dim));
  d.labels.resize(n);
  d.ids.resize(n);
  std::size_t row = 0;
  for (int c = 0; c < n_classes; ++c) {
    for (int k = 0; k < per_class; ++k, ++row) {
      auto fr = d.features.row(row);
      const auto mc = means.row(static_cast<std::size_t>(c));
      for (int j = 0; j < dim; ++j) fr[j] = mc[j] + spread * rng.normal();
      d.labels[row] = c;
      d.ids[row] = row;
    }
  }
  d.validate();
  return d;
}

Dataset gen_moons(int per_class, double noise, std::uint64_t seed) {
  if (per_class < 1) throw DataError("gen_moons: per_class >= 1 required");
  Rng rng = Rng::stream(seed, "data");
  Dataset d;
  d.n_classes = 2;
  const std::size_t n = 2 * static_cast<std::size_t>(per_class);
  d.features = Matrix2D(n, 2);
  d.labels.resize(n);
  d.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = i < static_cast<std::size_t>(per_class) ? 0 : 1;
    const double t = std::numbers::pi * rng.uniform01();
    double x, y;
    if (c == 0) {  // upper half of the unit circle at the origin
      x = std::cos(t);
      y = std::sin(t);
    } else {  // lower half of the unit circle centered at (1, 0.5)
      x = 1.0 - std::cos(t);
      y = 0.5 - std::sin(t);
    }
    auto fr = d.features.row(i);
    fr[0] = x + noise * rng.normal();
    fr[1] = y + noise * rng.normal();
    d.labels[i] = c;
    d.ids[i] = i;
  }
  d.validate();
  return d;
}

namespace {

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  *out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

Dataset load_csv(const std::string& path, int expected_classes) {
  std::ifstream in(path);
  if (!in) throw DataError("load_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("load_csv: empty file '" + path + "'");
  const auto header = split_line(line);
  if (header.size() < 2 || header.back() != "label")
    throw DataError("load_csv: expected header 'f0,...,label' in '" + path + "'");
  const std::size_t dim = header.size() - 1;
  for (std::size_t j = 0; j < dim; ++j)
    if (header[j] != "f" + std::to_string(j))
      throw DataError("load_csv: unexpected header column '" + header[j] + "'");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t row_no = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw DataError("load_csv: row " + std::to_string(row_no) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    for (std::size_t j = 0; j < dim; ++j) {
      double v;
      if (!parse_double(cells[j], &v))
        throw DataError("load_csv: non-numeric cell at row " + std::to_string(row_no));
      values.push_back(v);
    }
    double lv;
    if (!parse_double(cells.back(), &lv) || lv != std::floor(lv) || lv < 0)
      throw DataError("load_csv: bad label at row " + std::to_string(row_no));
    const int label = static_cast<int>(lv);
    if (expected_classes > 0 && label >= expected_classes)
      throw DataError("load_csv: label " + std::to_string(label) + " at row " +
                      std::to_string(row_no) + " >= declared class count " +
                      std::to_string(expected_classes));
    labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  if (labels.empty()) throw DataError("load_csv: no data rows in '" + path + "'");

  Dataset d;
  d.n_classes = expected_classes > 0 ? expected_classes : max_label + 1;
  d.features = Matrix2D(labels.size(), dim);
  std::copy(values.begin(), values.end(), d.features.data().begin());
  d.labels = std::move(labels);
  d.ids.resize(d.labels.size());
  for (std::size_t i = 0; i < d.ids.size(); ++i) d.ids[i] = i;
  d.validate();
  return d;
}

void save_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("save_csv: cannot write '" + path + "'");
  for (std::size_t j = 0; j < d.dim(); ++j) out << "f" << j << ",";
  out << "label\n";
  char buf[40];
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto fr = d.features.row(i);
    for (std::size_t j = 0; j < d.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", fr[j]);
      out << buf << ",";
    }
    out << d.labels[i] << "\n";
  }
  if (!out) throw DataError("save_csv: write failed for '" + path + "'");
}

std::pair<Dataset, Dataset> split(const Dataset& d, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw DataError("split: val_fraction must be in (0,1)");
  const auto counts = d.class_counts();
  for (std::size_t c : counts)
    if (c < 2) throw DataError("split: class with fewer than 2 examples cannot be stratified");

  // Proportional targets with largest-remainder rounding toward a total of
  // round(n * fraction), then clamped so both sides keep >= 1 per class.
  const std::size_t n = d.size();
  std::size_t target =
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
  target = std::clamp<std::size_t>(target, counts.size(), n - counts.size());
  std::vector<std::size_t> take(counts.size());
  std::vector<std::pair<double, std::size_t>> rema;  // remainder, class
  std::size_t base_total = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double exact = static_cast<double>(counts[c]) * val_fraction;
    take[c] = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(exact)), 1,
                                      counts[c] - 1);
    base_total += take[c];
    rema.push_back({exact - std::floor(exact), c});
  }
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (const auto& entry : rema) {
    if (base_total >= target) break;
    const std::size_t c = entry.second;
    if (take[c] < counts[c] - 1) {
      ++take[c];
      ++base_total;
    }
  }

  Rng rng = Rng::stream(seed, "data");
  std::vector<std::size_t> val_rows, train_rows;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i)
      if (static_cast<std::size_t>(d.labels[i]) == c) rows.push_back(i);
    rng.shuffle(rows);
    for (std::size_t i = 0; i < rows.size(); ++i)
      (i < take[c] ? val_rows : train_rows).push_back(rows[i]);
  }
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  return {subset(d, train_rows), subset(d, val_rows)};
}

Episode make_episode(const Dataset& d, int n_way, int k_shot, int q_query, std::uint64_t seed) {
  if (n_way < 1 || k_shot < 1 || q_query < 1)
    throw DataError("make_episode: n_way, k_shot, q_query must be positive");
  if (n_way > d.n_classes)
    throw DataError("make_episode: dataset has fewer classes than n_way");
  const auto counts = d.class_counts();
  Rng rng = Rng::stream(seed, "data");
  std::vector<std::size_t> classes(static_cast<std::size_t>(d.n_classes));
  for (std::size_t c = 0; c < classes.size(); ++c) classes[c] = c;
  rng.shuffle(classes);
  classes.resize(static_cast<std::size_t>(n_way));

  const std::size_t need = static_cast<std::size_t>(k_shot) + static_cast<std::size_t>(q_query);
  for (std::size_t c : classes)
    if (counts[c] < need)
      throw DataError("make_episode: class " + std::to_string(c) + " has " +
                      std::to_string(counts[c]) + " examples, needs " + std::to_string(need));

  Episode ep;
  std::vector<std::size_t> sup_rows, qry_rows;
  std::vector<int> sup_labels, qry_labels;
  for (int nc = 0; nc < n_way; ++nc) {
    const std::size_t orig = classes[static_cast<std::size_t>(nc)];
    ep.class_map.push_back(static_cast<int>(orig));
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (static_cast<std::size_t>(d.labels[i]) == orig) rows.push_back(i);
    rng.shuffle(rows);
    for (std::size_t i = 0; i < need; ++i) {
      if (i < static_cast<std::size_t>(k_shot)) {
        sup_rows.push_back(rows[i]);
        sup_labels.push_back(nc);
      } else {
        qry_rows.push_back(rows[i]);
        qry_labels.push_back(nc);
      }
    }
  }
  ep.support = subset(d, sup_rows);
  ep.query = subset(d, qry_rows);
  ep.support.labels = sup_labels;
  ep.query.labels = qry_labels;
  ep.support.n_classes = n_way;
  ep.query.n_classes = n_way;
  ep.support.validate();
  ep.query.validate();
  return ep;
}

void Standardizer::fit(const Matrix2D& x) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n == 0) throw DataError("Standardizer: empty fit data");
  mean.assign(d, 0.0);
  scale.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x.at(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x.at(i, j) - mean[j];
      scale[j] += c * c;
    }
  for (double& s : scale) s = std::max(std::sqrt(s / static_cast<double>(n)), 1e-12);
}

Matrix2D Standardizer::apply(const Matrix2D& x) const {
  if (x.cols() != mean.size()) throw ShapeError("Standardizer: dimension mismatch");
  Matrix2D out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      out.at(i, j) = (x.at(i, j) - mean[j]) / scale[j];
  return out;
}

Vec Standardizer::apply_row(std::span<const double> row) const {
  if (row.size() != mean.size()) throw ShapeError("Standardizer: dimension mismatch");
  Vec out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / scale[j];
  return out;
}

}  // namespace lbe
