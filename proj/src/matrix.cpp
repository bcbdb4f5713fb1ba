#include "acfkit/matrix.hpp"

#include <algorithm>
#include <stdexcept>

#include "acfkit/error.hpp"

namespace acfkit {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::ShapeMismatch, "matrix data size does not match rows*cols");
  }
}

Matrix Matrix::col_range(std::size_t first, std::size_t count) const {
  if (first + count > cols_) {
    throw Error(ErrorCode::ShapeMismatch, "column range out of bounds");
  }
  Matrix out(rows_, count);
  for (std::size_t r = 0; r < rows_; ++r) {
    auto src = row(r).subspan(first, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace acfkit
