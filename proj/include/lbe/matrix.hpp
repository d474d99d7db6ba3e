#pragma once

#include <initializer_list>
#include <span>

#include "lbe/common.hpp"

namespace lbe {

// Dense row-major matrix of doubles; the carrier for batches, embeddings
// and gradients throughout the library.
class Matrix2D {
 public:
  Matrix2D() = default;
  Matrix2D(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix2D from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  Vec& data() { return data_; }
  const Vec& data() const { return data_; }

  bool all_finite() const { return vec_all_finite(data_); }
  bool same_shape(const Matrix2D& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  Vec data_;
};

// C = A * B
Matrix2D matmul(const Matrix2D& a, const Matrix2D& b);
// C = A * B^T  (the common "batch x weights" product)
Matrix2D matmul_transb(const Matrix2D& a, const Matrix2D& b);
Matrix2D transpose(const Matrix2D& a);

}  // namespace lbe
