#pragma once

#include <cstddef>
#include <vector>

#include "nowag/types.hpp"

namespace nowag {

inline constexpr double kDefaultEpsilon = 1e-12;

// Two-sided scale factors. The stored values are the *effective* divisors
// (norm + epsilon), so denormalize is an exact algebraic inverse of
// normalize regardless of epsilon. Scales are binary32 because that is
// their archived width; every stored scale is > 0. epsilon is construction
// metadata and is not serialized.
struct NormScales {
  std::vector<float> col_scales;  // one per input column
  std::vector<float> row_scales;  // one per output row
  double epsilon = 0.0;
};

struct NormalizeResult {
  DenseMatrix normalized;
  NormScales scales;
};

// Column pass then row pass:
//   col_scales[j] = sqrt(sum_i W[i,j]^2) + eps,  W' = W / col_scales
//   row_scales[i] = sqrt(sum_j W'[i,j]^2) + eps, out = W' / row_scales
// With eps == 0 a zero-norm column or row is a hard error naming the index.
NormalizeResult normalize(const DenseMatrix& w, double epsilon = kDefaultEpsilon);

// out[i,j] = m[i,j] * row_scales[i] * col_scales[j]
DenseMatrix denormalize(const DenseMatrix& m, const NormScales& scales);

// out[i,j] = w[i,j] / (row_scales[i] * col_scales[j]); maps an original-scale
// matrix into the normalized frame of an existing archive.
DenseMatrix renormalize(const DenseMatrix& w, const NormScales& scales);

// Folds the scales into the matvec instead of the matrix:
//   xt[j] = x[j] * col_scales[j];  y[i] = row_scales[i] * sum_j m[i,j] * xt[j]
// Equivalent to multiplying by denormalize(m, scales).
DenseVector apply_inference(const DenseVector& x, const DenseMatrix& m,
                            const NormScales& scales);

}  // namespace nowag
