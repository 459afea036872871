#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace grotta {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<Vector> &rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double &operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  // Rows selected by index, in the given order.
  Matrix gather_rows(std::span<const std::size_t> indices) const;

  bool operator==(const Matrix &other) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Max-norm of the elementwise difference; shapes must match.
double max_abs_diff(const Matrix &a, const Matrix &b);
double max_abs(const Matrix &a);
bool all_finite(const Matrix &a);

// Index of the largest entry in each row; ties go to the lower index.
std::vector<std::size_t> argmax_rows(const Matrix &m);
std::size_t argmax(std::span<const double> v);

Vector column_sums(const Matrix &m);

} // namespace grotta
