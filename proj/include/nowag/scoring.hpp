#pragma once

#include <cstddef>
#include <vector>

#include "nowag/calibration.hpp"
#include "nowag/types.hpp"

namespace nowag {

// Per-entry saliency scores. Double so that rescaling the calibration
// statistics perturbs comparisons only at the last ulp.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> scores;

  ScoreMatrix() = default;
  ScoreMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), scores(r * c, 0.0) {}

  double at(std::size_t i, std::size_t j) const { return scores[i * cols + j]; }
  double& at(std::size_t i, std::size_t j) { return scores[i * cols + j]; }
  std::size_t size() const { return rows * cols; }
};

// score[i,j] = normalized[i,j]^2 * h[j]. The squared form is monotone in the
// magnitude score |normalized| * sqrt(h), so rankings are unchanged, and it
// doubles as the exact per-entry contribution to the diagonal proxy loss.
ScoreMatrix nowag_scores(const DenseMatrix& normalized, const HessianDiagonal& h);

// Magnitude-times-activation-norm baseline: |w[i,j]| * sqrt(h[j]) on the
// raw (un-normalized) weights.
ScoreMatrix wanda_scores(const DenseMatrix& w, const HessianDiagonal& h);

// sum_ij (a[i,j] - b[i,j])^2 * h[j], accumulated row-major in double.
double proxy_loss_diag(const DenseMatrix& a, const DenseMatrix& b,
                       const HessianDiagonal& h);

// tr((A - B) H (A - B)^T) for a full square second-moment matrix H.
// H must be symmetric within a 1e-6 relative tolerance.
double proxy_loss_full(const DenseMatrix& a, const DenseMatrix& b,
                       const DenseMatrix& h);

}  // namespace nowag
