#pragma once

#include <cstddef>
#include <vector>

#include "nowag/types.hpp"

namespace nowag {

// Calibration activations, one sample per row.
struct ActivationBatch {
  std::size_t samples = 0;
  std::size_t dim = 0;
  std::vector<float> data;  // row-major, samples x dim

  ActivationBatch() = default;
  ActivationBatch(std::size_t m, std::size_t d, std::vector<float> x)
      : samples(m), dim(d), data(std::move(x)) {
    if (data.size() != samples * dim) {
      throw ValidationError("ActivationBatch: data length mismatch");
    }
  }
  explicit ActivationBatch(const DenseMatrix& m)
      : samples(m.rows), dim(m.cols), data(m.data) {}

  float at(std::size_t t, std::size_t j) const { return data[t * dim + j]; }
};

// Per-input-channel diagonal statistics: weights[j] is the sum of squared
// activations seen on channel j. Kept in double; it is an accumulator, not
// a storage payload. weights[j] == 0 only for channels whose activations
// were identically zero.
struct HessianDiagonal {
  std::size_t dim = 0;
  std::vector<double> weights;

  HessianDiagonal() = default;
  explicit HessianDiagonal(std::size_t d) : dim(d), weights(d, 0.0) {}
  HessianDiagonal(std::size_t d, std::vector<double> w) : dim(d), weights(std::move(w)) {
    if (weights.size() != dim) {
      throw ValidationError("HessianDiagonal: weights length mismatch");
    }
  }
};

// weights[j] = sum_t X[t,j]^2, accumulated in double.
HessianDiagonal compute_hessian_diag(const ActivationBatch& acts);

// Streaming variant: folds a chunk into running statistics. Accumulating a
// batch row by row equals computing it in one shot.
void accumulate_hessian_diag(HessianDiagonal& state, const ActivationBatch& chunk);

// Full sample second-moment matrix (1/m) X^T X, for the trace-form loss.
// Symmetric by construction (the upper triangle is mirrored).
DenseMatrix full_sample_hessian(const ActivationBatch& acts);

// Rejects negative, non-finite, or wrong-length diagonals coming from files.
void validate_hessian_diag(const HessianDiagonal& h, std::size_t expected_dim);

}  // namespace nowag
