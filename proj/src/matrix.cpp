#include "ahakv/matrix.hpp"

#include <stdexcept>
#include <string>

namespace ahakv {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<std::vector<double>> tmp;
  tmp.reserve(rows.size());
  for (const auto& r : rows) tmp.emplace_back(r);
  return from_rows(tmp);
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) {
    cols_ = values.size();
  } else if (values.size() != cols_) {
    throw std::invalid_argument("Matrix::append_row: expected " + std::to_string(cols_) +
                                " columns, got " + std::to_string(values.size()));
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

void Matrix::erase_row(std::size_t r) {
  if (r >= rows_) throw std::out_of_range("Matrix::erase_row: row out of range");
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(r * cols_);
  data_.erase(first, first + static_cast<std::ptrdiff_t>(cols_));
  --rows_;
}

Matrix Matrix::gather_rows(std::span<const std::size_t> which) const {
  Matrix out(which.size(), cols_);
  for (std::size_t i = 0; i < which.size(); ++i) {
    if (which[i] >= rows_) throw std::out_of_range("Matrix::gather_rows: row out of range");
    auto src = row(which[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

LowerTriangular::LowerTriangular(std::size_t n) : n_(n), data_(n * (n + 1) / 2, 0.0) {}

LowerTriangular LowerTriangular::from_rows(const std::vector<std::vector<double>>& rows) {
  LowerTriangular t(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != i + 1)
      throw std::invalid_argument("LowerTriangular::from_rows: row " + std::to_string(i) +
                                  " must have " + std::to_string(i + 1) + " entries");
    std::copy(rows[i].begin(), rows[i].end(), t.row(i).begin());
  }
  return t;
}

}  // namespace ahakv
