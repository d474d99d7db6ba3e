#include "lbe/matrix.hpp"

namespace lbe {

Matrix2D Matrix2D::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix2D m(rows.size(), rows.size() ? rows.begin()->size() : 0);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != m.cols()) throw ShapeError("from_rows: ragged row lengths");
    std::size_t c = 0;
    for (double v : row) m.at(r, c++) = v;
    ++r;
  }
  return m;
}

double& Matrix2D::at(std::size_t r, std::size_t c) {
  if (r >= rows_ || c >= cols_) throw RangeError("Matrix2D::at: index out of range");
  return data_[r * cols_ + c];
}

double Matrix2D::at(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c >= cols_) throw RangeError("Matrix2D::at: index out of range");
  return data_[r * cols_ + c];
}

Matrix2D matmul(const Matrix2D& a, const Matrix2D& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix2D c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ai = a.row(i);
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix2D matmul_transb(const Matrix2D& a, const Matrix2D& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_transb: inner dimensions differ");
  Matrix2D c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ai = a.row(i);
    auto ci = c.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) ci[j] = vec_dot(ai, b.row(j));
  }
  return c;
}

Matrix2D transpose(const Matrix2D& a) {
  Matrix2D t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

}  // namespace lbe
