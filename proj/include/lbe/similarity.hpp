#pragma once

#include <vector>

#include "lbe/matrix.hpp"
#include "lbe/optim.hpp"

namespace lbe {

// Learnable symmetric pairwise similarity over n training examples.
// One free logit is stored per unordered pair (i < j) and mapped through a
// sigmoid, so every entry stays in (0,1) and symmetry holds structurally.
// The diagonal is undefined and never read.
class SimilarityMatrix {
 public:
  explicit SimilarityMatrix(std::size_t n);

  // Logits seeded from label agreement: +2 for same-class pairs, -2 for
  // different-class pairs. Ablation aid; the default is the uninformative 0.
  static SimilarityMatrix label_informed(const std::vector<int>& labels);

  std::size_t size() const { return n_; }
  std::size_t pair_count() const { return theta_.size(); }
  static std::size_t pair_index(std::size_t n, std::size_t i, std::size_t j);
  std::size_t pair_index(std::size_t i, std::size_t j) const { return pair_index(n_, i, j); }

  double value(std::size_t i, std::size_t j) const;

  const Vec& logits() const { return theta_; }
  Vec& logits() { return theta_; }

  // d(anything)/d(logit) from d(anything)/d(A entry): grad * A * (1 - A).
  Vec chain_to_logits(const Vec& grad_a) const;

  // Adam step on the logits using a gradient given w.r.t. the A entries.
  void update(const Vec& grad_a, double lr, double weight_decay);

  // Dense k x k view over the given ids; diagonal fixed at 1.0 for display.
  Matrix2D snapshot(const std::vector<std::size_t>& ids) const;

 private:
  std::size_t n_ = 0;
  Vec theta_;
  AdamState adam_;
};

}  // namespace lbe
