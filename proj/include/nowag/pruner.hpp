#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nowag/calibration.hpp"
#include "nowag/normalization.hpp"
#include "nowag/scoring.hpp"
#include "nowag/types.hpp"

namespace nowag {

struct SparsityPattern {
  enum class Kind : std::uint8_t { kUnstructured = 0, kSemiStructured = 1 };

  Kind kind = Kind::kUnstructured;
  double sparsity = 0.0;        // unstructured: fraction zeroed, in [0, 1]
  std::uint32_t keep_n = 0;     // semi-structured: kept per group
  std::uint32_t group_m = 0;    // semi-structured: group width

  static SparsityPattern unstructured(double s);
  static SparsityPattern semi_structured(std::uint32_t n, std::uint32_t m);
};

// One keep-bit per entry (1 = kept). Stored unpacked in memory; the archive
// writer packs 8 per byte.
struct PruneMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;
  SparsityPattern pattern;

  std::uint8_t at(std::size_t i, std::size_t j) const { return bits[i * cols + j]; }
  std::size_t zero_count() const;
  std::size_t kept_count() const { return rows * cols - zero_count(); }
};

// values holds W with pruned entries zeroed; kept entries are bit-identical
// to the input weights.
struct PrunedMatrix {
  DenseMatrix values;
  PruneMask mask;
};

// Entries are ranked by the total order (score, row-major flat index), which
// makes every selection deterministic under ties: the smaller flat index is
// treated as the smaller score. Selection runs through nth_element, linear
// time on average.
//
// Returns the k_zero-th smallest score under that order (the score of the
// last entry that falls below the cut), or -inf when k_zero == 0.
double select_threshold(const ScoreMatrix& s, std::size_t k_zero);

// Unstructured: zeroes exactly floor(sparsity * rows * cols) lowest-ordered
// entries. Semi-structured: within each aligned group of group_m consecutive
// entries in a row, keeps the keep_n highest-ordered and zeroes the rest;
// cols must be divisible by group_m (no implicit padding).
PruneMask build_mask(const ScoreMatrix& s, const SparsityPattern& pattern);

// Normalizes w, scores the normalized matrix against h, selects the mask,
// and applies it to the original-scale weights.
PrunedMatrix prune(const DenseMatrix& w, const HessianDiagonal& h,
                   const SparsityPattern& pattern, double epsilon = kDefaultEpsilon);

// Same selection and application, but with caller-supplied scores.
PrunedMatrix prune_with_scores(const ScoreMatrix& s, const DenseMatrix& w,
                               const SparsityPattern& pattern);

}  // namespace nowag
