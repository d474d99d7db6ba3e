#include "lbe/similarity.hpp"

#include <set>

namespace lbe {

SimilarityMatrix::SimilarityMatrix(std::size_t n) : n_(n) {
  if (n == 0) throw ShapeError("SimilarityMatrix: n must be positive");
  theta_.assign(n * (n - 1) / 2, 0.0);
}

SimilarityMatrix SimilarityMatrix::label_informed(const std::vector<int>& labels) {
  SimilarityMatrix m(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = i + 1; j < labels.size(); ++j)
      m.theta_[m.pair_index(i, j)] = labels[i] == labels[j] ? 2.0 : -2.0;
  return m;
}

std::size_t SimilarityMatrix::pair_index(std::size_t n, std::size_t i, std::size_t j) {
  if (i == j) throw DiagonalError("SimilarityMatrix: diagonal access");
  if (i > j) std::swap(i, j);
  if (j >= n) throw RangeError("SimilarityMatrix: index out of range");
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

double SimilarityMatrix::value(std::size_t i, std::size_t j) const {
  return sigmoid(theta_[pair_index(i, j)]);
}

Vec SimilarityMatrix::chain_to_logits(const Vec& grad_a) const {
  if (grad_a.size() != theta_.size())
    throw ShapeError("chain_to_logits: one gradient per stored pair required");
  Vec g(theta_.size());
  for (std::size_t p = 0; p < theta_.size(); ++p) {
    const double a = sigmoid(theta_[p]);
    g[p] = grad_a[p] * a * (1.0 - a);
  }
  return g;
}

void SimilarityMatrix::update(const Vec& grad_a, double lr, double weight_decay) {
  if (!vec_all_finite(grad_a)) throw NumericError("SimilarityMatrix::update: non-finite gradient");
  const Vec g = chain_to_logits(grad_a);
  adam_step(theta_, g, adam_, lr, weight_decay);
}

Matrix2D SimilarityMatrix::snapshot(const std::vector<std::size_t>& ids) const {
  std::set<std::size_t> seen(ids.begin(), ids.end());
  if (seen.size() != ids.size()) throw ContractError("snapshot: duplicate ids");
  Matrix2D s(ids.size(), ids.size(), 1.0);
  for (std::size_t a = 0; a < ids.size(); ++a)
    for (std::size_t b = a + 1; b < ids.size(); ++b) {
      const double v = value(ids[a], ids[b]);
      s.at(a, b) = v;
      s.at(b, a) = v;
    }
  return s;
}

}  // namespace lbe
