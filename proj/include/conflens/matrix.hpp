#pragma once

#include <cstddef>
#include <vector>

#include "conflens/error.hpp"

namespace conflens {

/// Dense n x n matrix, row-major. Rows index classifier outputs (or refined
/// labels), columns index the conditioning label.
template <typename T>
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, T fill = T{}) : n_(n), data_(n * n, fill) {}
  SquareMatrix(std::size_t n, std::vector<T> row_major) : n_(n), data_(std::move(row_major)) {
    if (data_.size() != n_ * n_) throw usage_error("matrix payload is not n x n");
  }

  static SquareMatrix identity(std::size_t n) {
    SquareMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t size() const { return n_; }
  T& operator()(std::size_t row, std::size_t col) { return data_[row * n_ + col]; }
  const T& operator()(std::size_t row, std::size_t col) const { return data_[row * n_ + col]; }
  const std::vector<T>& data() const { return data_; }

  T column_sum(std::size_t col) const {
    T s{};
    for (std::size_t r = 0; r < n_; ++r) s += (*this)(r, col);
    return s;
  }

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<T> data_;
};

using Matrix = SquareMatrix<double>;

}  // namespace conflens
