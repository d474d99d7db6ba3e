#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lbe/matrix.hpp"

namespace lbe {

// A labeled feature table. `ids` are stable global example ids: generators
// and loaders assign 0..n-1; subset operations (split, episodes) keep the
// source ids so provenance and disjointness stay checkable.
struct Dataset {
  Matrix2D features;  // n x d
  std::vector<int> labels;
  int n_classes = 0;
  std::vector<std::size_t> ids;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  Matrix2D one_hot() const;
  std::vector<std::size_t> class_counts() const;
  // Checks label range, id uniqueness and that no class is empty.
  void validate() const;
};

Dataset subset(const Dataset& d, const std::vector<std::size_t>& rows);

// Isotropic Gaussian clusters with class means spaced at least
// max(4*spread, 1) apart (adjacent means on a circle in the first two
// dimensions, or on a line when dim == 1).
Dataset gen_blobs(int n_classes, int per_class, int dim, double spread, std::uint64_t seed);

// Two interleaved half-circles, the classic 2-class toy problem.
Dataset gen_moons(int per_class, double noise, std::uint64_t seed);

// CSV with header "f0,...,f{d-1},label". When expected_classes > 0, labels
// must lie in [0, expected_classes); otherwise the class count is inferred.
Dataset load_csv(const std::string& path, int expected_classes = 0);
void save_csv(const Dataset& d, const std::string& path);

// Stratified split; per-class validation counts stay within one example of
// proportional, and both sides keep at least one example per class.
std::pair<Dataset, Dataset> split(const Dataset& d, double val_fraction, std::uint64_t seed);

struct Episode {
  Dataset support, query;
  std::vector<int> class_map;  // class_map[episode label] = original label
};

Episode make_episode(const Dataset& d, int n_way, int k_shot, int q_query, std::uint64_t seed);

// Per-dimension zero mean / unit variance, fit on the training split.
struct Standardizer {
  Vec mean, scale;
  void fit(const Matrix2D& x);
  Matrix2D apply(const Matrix2D& x) const;
  Vec apply_row(std::span<const double> row) const;
};

}  // namespace lbe
