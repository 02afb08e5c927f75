#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ettckge/error.hpp"

namespace ettckge {

// Dense row-major matrix. Rows are entity/relation/token vectors of length
// cols() == D throughout this codebase.
template <typename S>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, S fill = S(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  S& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  S operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<S> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const S> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<S>& data() { return data_; }
  const std::vector<S>& data() const { return data_; }

  void fill(S v) { data_.assign(data_.size(), v); }

  bool all_finite() const {
    for (S v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<S> data_;
};

template <typename S>
inline void require_shape(const Matrix<S>& m, std::size_t rows, std::size_t cols,
                          const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(what + ": expected " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", got " + std::to_string(m.rows()) +
                     "x" + std::to_string(m.cols()));
  }
}

}  // namespace ettckge
