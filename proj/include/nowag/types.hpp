#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nowag {

// Raised when caller-supplied data violates a documented precondition or a
// file-format invariant. The CLI maps this to exit code 2; anything else
// that escapes is treated as an internal error (exit code 1).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major dense matrix with binary32 entries. Payloads round-trip through
// the on-disk tensor container bit-exactly, so the in-memory element type
// matches the storage type; arithmetic on top of it accumulates in double.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
  DenseMatrix(std::size_t r, std::size_t c, std::vector<float> d)
      : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != rows * cols) {
      throw ValidationError("DenseMatrix: data length " + std::to_string(data.size()) +
                            " != rows*cols = " + std::to_string(rows * cols));
    }
  }

  float& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  float at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::size_t size() const { return rows * cols; }

  bool same_shape(const DenseMatrix& other) const {
    return rows == other.rows && cols == other.cols;
  }
};

struct DenseVector {
  std::size_t len = 0;
  std::vector<float> data;

  DenseVector() = default;
  explicit DenseVector(std::size_t n) : len(n), data(n, 0.0f) {}
  DenseVector(std::size_t n, std::vector<float> d) : len(n), data(std::move(d)) {
    if (data.size() != len) {
      throw ValidationError("DenseVector: data length " + std::to_string(data.size()) +
                            " != len = " + std::to_string(len));
    }
  }
};

// Throws naming the first offending flat index.
void require_finite(const DenseMatrix& m, const std::string& what);
void require_finite(const DenseVector& v, const std::string& what);

}  // namespace nowag
