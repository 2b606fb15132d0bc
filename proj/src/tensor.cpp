#include "cascademl/tensor.hpp"

#include <cmath>

#include "cascademl/errors.hpp"

namespace cml {

bool Tensor2::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.rows) {
    throw Error(ErrorKind::invalid_argument, "matmul: inner dimensions differ");
  }
  Tensor2 out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) {
        out(i, j) += aik * b(k, j);
      }
    }
  }
  return out;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.cols) {
    throw Error(ErrorKind::invalid_argument,
                "matmul_nt: inner dimensions differ");
  }
  Tensor2 out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      double sum = 0.0;
      const double* ar = &a.values[i * a.cols];
      const double* br = &b.values[j * b.cols];
      for (std::size_t k = 0; k < a.cols; ++k) sum += ar[k] * br[k];
      out(i, j) = sum;
    }
  }
  return out;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows != b.rows) {
    throw Error(ErrorKind::invalid_argument,
                "matmul_tn: inner dimensions differ");
  }
  Tensor2 out(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* ar = &a.values[k * a.cols];
    const double* br = &b.values[k * b.cols];
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = ar[i];
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) {
        out(i, j) += aki * br[j];
      }
    }
  }
  return out;
}

std::vector<double> column(const Tensor2& t, std::size_t c) {
  if (c >= t.cols) {
    throw Error(ErrorKind::invalid_argument, "column: index out of range");
  }
  std::vector<double> out(t.rows);
  for (std::size_t r = 0; r < t.rows; ++r) out[r] = t(r, c);
  return out;
}

Tensor2 gather_rows(const Tensor2& t, const std::vector<std::size_t>& rows) {
  Tensor2 out(rows.size(), t.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= t.rows) {
      throw Error(ErrorKind::invalid_argument,
                  "gather_rows: index out of range");
    }
    for (std::size_t c = 0; c < t.cols; ++c) out(i, c) = t(rows[i], c);
  }
  return out;
}

Tensor2 hconcat(const std::vector<const Tensor2*>& blocks) {
  if (blocks.empty()) {
    throw Error(ErrorKind::invalid_argument, "hconcat: no blocks");
  }
  const std::size_t rows = blocks.front()->rows;
  std::size_t cols = 0;
  for (const Tensor2* b : blocks) {
    if (b->rows != rows) {
      throw Error(ErrorKind::invalid_argument, "hconcat: row counts differ");
    }
    cols += b->cols;
  }
  Tensor2 out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t offset = 0;
    for (const Tensor2* b : blocks) {
      for (std::size_t c = 0; c < b->cols; ++c) {
        out(r, offset + c) = (*b)(r, c);
      }
      offset += b->cols;
    }
  }
  return out;
}

}  // namespace cml
