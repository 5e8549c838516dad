#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace ahakv {

/// Dense row-major matrix of doubles. Small and value-semantic; the library
/// never needs more than row access, appends, and dot products.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  /// Appends one row; the first append on an empty 0x0 matrix fixes the width.
  void append_row(std::span<const double> values);
  /// Removes row r, shifting later rows up.
  void erase_row(std::size_t r);
  /// Returns the rows listed in `which`, in that order.
  Matrix gather_rows(std::span<const std::size_t> which) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Left-to-right dot product. Lengths must match.
double dot(std::span<const double> a, std::span<const double> b);

/// Causal (lower-triangular) matrix stored as ragged rows: row i holds
/// columns 0..i. Entries above the diagonal do not exist.
class LowerTriangular {
 public:
  LowerTriangular() = default;
  explicit LowerTriangular(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  std::span<double> row(std::size_t i) { return {data_.data() + offset(i), i + 1}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + offset(i), i + 1}; }

  /// Entry (i, j); zero for j > i.
  double at(std::size_t i, std::size_t j) const { return j > i ? 0.0 : data_[offset(i) + j]; }

  static LowerTriangular from_rows(const std::vector<std::vector<double>>& rows);

  friend bool operator==(const LowerTriangular&, const LowerTriangular&) = default;

 private:
  static std::size_t offset(std::size_t i) noexcept { return i * (i + 1) / 2; }

  std::size_t n_ = 0;
  std::vector<double> data_;
};

}  // namespace ahakv
