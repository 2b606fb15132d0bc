#pragma once

#include <cstddef>
#include <vector>

namespace cml {

// Dense row-major matrix of doubles. All activations, logits, labels and
// feature blocks in the library are Tensor2 instances.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major, rows*cols entries

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) {
    return values[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return values[r * cols + c];
  }

  bool same_shape(const Tensor2& other) const {
    return rows == other.rows && cols == other.cols;
  }

  bool all_finite() const;
};

// C = A * B           (A: m x k, B: k x n)
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
// C = A * B^T         (A: m x k, B: n x k)
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);
// C = A^T * B         (A: k x m, B: k x n)
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);

// Extracts one column as a vector.
std::vector<double> column(const Tensor2& t, std::size_t c);

// Gathers the given rows into a new matrix, in the order given.
Tensor2 gather_rows(const Tensor2& t, const std::vector<std::size_t>& rows);

// Horizontal concatenation; all blocks must share the row count.
Tensor2 hconcat(const std::vector<const Tensor2*>& blocks);

}  // namespace cml
