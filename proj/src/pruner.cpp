#include "nowag/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nowag {

namespace {

// Total order over entries: primary key score ascending, flat index breaks
// ties, so selections are unique and deterministic.
struct ScoreOrder {
  const double* scores;
  bool operator()(std::size_t a, std::size_t b) const {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a < b;
  }
};

void check_scores_finite(const ScoreMatrix& s) {
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    if (!std::isfinite(s.scores[i]) || s.scores[i] < 0.0) {
      throw ValidationError("scores: entry at flat index " + std::to_string(i) +
                            " is negative or non-finite");
    }
  }
}

}  // namespace

SparsityPattern SparsityPattern::unstructured(double s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw ValidationError("sparsity must lie in [0, 1], got " + std::to_string(s));
  }
  SparsityPattern p;
  p.kind = Kind::kUnstructured;
  p.sparsity = s;
  return p;
}

SparsityPattern SparsityPattern::semi_structured(std::uint32_t n, std::uint32_t m) {
  if (n < 1 || n > m) {
    throw ValidationError("semi-structured pattern requires 1 <= N <= M, got " +
                          std::to_string(n) + ":" + std::to_string(m));
  }
  SparsityPattern p;
  p.kind = Kind::kSemiStructured;
  p.keep_n = n;
  p.group_m = m;
  return p;
}

std::size_t PruneMask::zero_count() const {
  std::size_t zeros = 0;
  for (std::uint8_t b : bits) zeros += (b == 0);
  return zeros;
}

double select_threshold(const ScoreMatrix& s, std::size_t k_zero) {
  if (k_zero > s.size()) {
    throw ValidationError("select_threshold: k_zero " + std::to_string(k_zero) +
                          " exceeds entry count " + std::to_string(s.size()));
  }
  check_scores_finite(s);
  if (k_zero == 0) {
    return -std::numeric_limits<double>::infinity();
  }
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::nth_element(idx.begin(), idx.begin() + (k_zero - 1), idx.end(),
                   ScoreOrder{s.scores.data()});
  return s.scores[idx[k_zero - 1]];
}

PruneMask build_mask(const ScoreMatrix& s, const SparsityPattern& pattern) {
  check_scores_finite(s);
  PruneMask mask;
  mask.rows = s.rows;
  mask.cols = s.cols;
  mask.pattern = pattern;
  mask.bits.assign(s.size(), 1);

  if (pattern.kind == SparsityPattern::Kind::kUnstructured) {
    std::size_t total = s.size();
    std::size_t k_zero =
        static_cast<std::size_t>(std::floor(pattern.sparsity * static_cast<double>(total)));
    if (k_zero == 0) return mask;
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    std::nth_element(idx.begin(), idx.begin() + k_zero, idx.end(),
                     ScoreOrder{s.scores.data()});
    for (std::size_t p = 0; p < k_zero; ++p) mask.bits[idx[p]] = 0;
    return mask;
  }

  std::uint32_t m = pattern.group_m;
  if (s.cols % m != 0) {
    throw ValidationError("semi-structured pruning: cols " + std::to_string(s.cols) +
                          " not divisible by group width " + std::to_string(m) +
                          "; no implicit padding");
  }
  std::vector<std::size_t> group(m);
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t g = 0; g < s.cols / m; ++g) {
      std::size_t base = i * s.cols + g * m;
      for (std::uint32_t t = 0; t < m; ++t) group[t] = base + t;
      std::sort(group.begin(), group.end(), ScoreOrder{s.scores.data()});
      for (std::uint32_t t = 0; t < m - pattern.keep_n; ++t) mask.bits[group[t]] = 0;
    }
  }
  return mask;
}

namespace {

PrunedMatrix apply_mask(const DenseMatrix& w, PruneMask mask) {
  PrunedMatrix out;
  out.values = w;
  for (std::size_t p = 0; p < mask.bits.size(); ++p) {
    if (!mask.bits[p]) out.values.data[p] = 0.0f;
  }
  out.mask = std::move(mask);
  return out;
}

}  // namespace

PrunedMatrix prune(const DenseMatrix& w, const HessianDiagonal& h,
                   const SparsityPattern& pattern, double epsilon) {
  validate_hessian_diag(h, w.cols);
  NormalizeResult norm = normalize(w, epsilon);
  ScoreMatrix s = nowag_scores(norm.normalized, h);
  return apply_mask(w, build_mask(s, pattern));
}

PrunedMatrix prune_with_scores(const ScoreMatrix& s, const DenseMatrix& w,
                               const SparsityPattern& pattern) {
  if (s.rows != w.rows || s.cols != w.cols) {
    throw ValidationError("prune_with_scores: score shape " + std::to_string(s.rows) + "x" +
                          std::to_string(s.cols) + " != weight shape " +
                          std::to_string(w.rows) + "x" + std::to_string(w.cols));
  }
  require_finite(w, "prune_with_scores weights");
  return apply_mask(w, build_mask(s, pattern));
}

}  // namespace nowag
