#include "doctest.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "nowag/pruner.hpp"
#include "test_util.hpp"

using namespace nowag;

namespace {

// Exhaustive reference for unstructured selection on tiny score sets: among
// all subsets of exactly k_zero entries, the one with the smallest score sum,
// ties broken toward the lexicographically smallest sorted index list. That
// winner is always the greedy "first k_zero under (score, index)" set, which
// is what the production selection must produce.
std::vector<std::size_t> brute_force_zero_set(const std::vector<double>& scores,
                                              std::size_t k_zero) {
  const std::size_t n = scores.size();
  REQUIRE(n <= 20);
  double best_sum = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != k_zero) continue;
    double sum = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t p = 0; p < n; ++p) {
      if (mask & (1u << p)) {
        sum += scores[p];
        idx.push_back(p);
      }
    }
    if (sum < best_sum || (sum == best_sum && idx < best)) {
      best_sum = sum;
      best = idx;
    }
  }
  return best;
}

std::vector<std::size_t> zeroed_indices(const PruneMask& mask) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < mask.bits.size(); ++p) {
    if (!mask.bits[p]) out.push_back(p);
  }
  return out;
}

}  // namespace

TEST_CASE("threshold selection on a hand example") {
  // Scores [[4,1],[2,3]]: the two smallest are 1 and 2, so the threshold for
  // k_zero = 2 is 2.
  ScoreMatrix s(2, 2);
  s.at(0, 0) = 4.0;
  s.at(0, 1) = 1.0;
  s.at(1, 0) = 2.0;
  s.at(1, 1) = 3.0;
  CHECK(select_threshold(s, 2) == 2.0);
  CHECK(select_threshold(s, 1) == 1.0);
  CHECK(select_threshold(s, 4) == 4.0);
  CHECK(select_threshold(s, 0) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(select_threshold(s, 5), ValidationError);
}

TEST_CASE("ties are broken toward the lower flat index") {
  ScoreMatrix s(2, 3);
  for (auto& v : s.scores) v = 1.0;
  PruneMask mask = build_mask(s, SparsityPattern::unstructured(0.5));
  CHECK(zeroed_indices(mask) == std::vector<std::size_t>{0, 1, 2});
  CHECK(select_threshold(s, 3) == 1.0);
}

TEST_CASE("unstructured masks zero exactly floor(s * total) entries") {
  DenseMatrix w = testutil::random_matrix(17, 13, 301);
  HessianDiagonal h = testutil::random_hessian(13, 302);
  PrunedMatrix pm = prune(w, h, SparsityPattern::unstructured(0.37));
  CHECK(pm.mask.zero_count() == static_cast<std::size_t>(0.37 * 17 * 13));
  CHECK(pm.mask.zero_count() == 81);

  CHECK(prune(w, h, SparsityPattern::unstructured(0.0)).mask.zero_count() == 0);
  CHECK(prune(w, h, SparsityPattern::unstructured(1.0)).mask.zero_count() == 17 * 13);
}

TEST_CASE("unstructured selection matches exhaustive enumeration") {
  std::mt19937_64 rng(303);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t rows = 2 + rng() % 3;
    std::size_t cols = 2 + rng() % 2;
    ScoreMatrix s(rows, cols);
    for (auto& v : s.scores) {
      // Quantized scores so that ties actually occur.
      v = static_cast<double>(rng() % 8) * 0.25;
    }
    double frac = static_cast<double>(rng() % 11) / 10.0;
    std::size_t k_zero = static_cast<std::size_t>(frac * static_cast<double>(s.size()));

    PruneMask mask = build_mask(s, SparsityPattern::unstructured(frac));
    CHECK(zeroed_indices(mask) == brute_force_zero_set(s.scores, k_zero));
  }
}

TEST_CASE("2:4 on a hand group keeps the two highest scores") {
  // Scores [5,1,3,2]: keep indices 0 and 2.
  ScoreMatrix s(1, 4);
  s.at(0, 0) = 5.0;
  s.at(0, 1) = 1.0;
  s.at(0, 2) = 3.0;
  s.at(0, 3) = 2.0;
  PruneMask mask = build_mask(s, SparsityPattern::semi_structured(2, 4));
  CHECK(mask.bits == std::vector<std::uint8_t>{1, 0, 1, 0});
}

TEST_CASE("semi-structured groups keep exactly N entries each") {
  struct Combo {
    std::uint32_t n, m;
  };
  for (Combo c : {Combo{1, 2}, Combo{2, 4}, Combo{4, 8}, Combo{3, 4}}) {
    DenseMatrix w = testutil::random_matrix(10, 24, 400 + c.m);
    HessianDiagonal h = testutil::random_hessian(24, 500 + c.m);
    PrunedMatrix pm = prune(w, h, SparsityPattern::semi_structured(c.n, c.m));
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t g = 0; g < 24 / c.m; ++g) {
        std::size_t kept = 0;
        for (std::size_t t = 0; t < c.m; ++t) kept += pm.mask.at(i, g * c.m + t);
        CHECK(kept == c.n);
      }
    }
  }
}

TEST_CASE("group width must divide the column count") {
  DenseMatrix w = testutil::random_matrix(4, 10, 601);
  HessianDiagonal h = testutil::random_hessian(10, 602);
  CHECK_THROWS_AS(prune(w, h, SparsityPattern::semi_structured(2, 4)), ValidationError);
}

TEST_CASE("invalid patterns are rejected at construction") {
  CHECK_THROWS_AS(SparsityPattern::unstructured(-0.1), ValidationError);
  CHECK_THROWS_AS(SparsityPattern::unstructured(1.5), ValidationError);
  CHECK_THROWS_AS(SparsityPattern::unstructured(std::nan("")), ValidationError);
  CHECK_THROWS_AS(SparsityPattern::semi_structured(0, 4), ValidationError);
  CHECK_THROWS_AS(SparsityPattern::semi_structured(5, 4), ValidationError);
}

TEST_CASE("kept values pass through bit-identically, pruned slots hold zero") {
  DenseMatrix w = testutil::random_matrix(12, 16, 603, -4.0f, 4.0f);
  HessianDiagonal h = testutil::random_hessian(16, 604);
  PrunedMatrix pm = prune(w, h, SparsityPattern::unstructured(0.5));
  for (std::size_t p = 0; p < w.data.size(); ++p) {
    if (pm.mask.bits[p]) {
      CHECK(std::bit_cast<std::uint32_t>(pm.values.data[p]) ==
            std::bit_cast<std::uint32_t>(w.data[p]));
    } else {
      CHECK(pm.values.data[p] == 0.0f);
    }
  }
  CHECK(pm.mask.kept_count() + pm.mask.zero_count() == w.size());
}

TEST_CASE("the pipeline equals scoring plus caller-supplied selection") {
  DenseMatrix w = testutil::random_matrix(8, 12, 605);
  HessianDiagonal h = testutil::random_hessian(12, 606);
  SparsityPattern pat = SparsityPattern::unstructured(0.25);

  PrunedMatrix a = prune(w, h, pat);
  NormalizeResult norm = normalize(w);
  PrunedMatrix b = prune_with_scores(nowag_scores(norm.normalized, h), w, pat);
  CHECK(a.mask.bits == b.mask.bits);
  CHECK(a.values.data == b.values.data);
}

TEST_CASE("uniformly rescaling the calibration diagonal leaves the mask unchanged") {
  DenseMatrix w = testutil::random_matrix(14, 20, 607);
  HessianDiagonal h = testutil::random_hessian(20, 608);
  HessianDiagonal h_big(20);
  for (std::size_t j = 0; j < 20; ++j) h_big.weights[j] = h.weights[j] * 1000.0;

  SparsityPattern pat = SparsityPattern::unstructured(0.5);
  CHECK(prune(w, h, pat).mask.bits == prune(w, h_big, pat).mask.bits);
}

TEST_CASE("negative and malformed scores are rejected") {
  DenseMatrix w = testutil::random_matrix(2, 2, 609);
  ScoreMatrix bad(2, 2);
  bad.at(1, 1) = -1.0;
  CHECK_THROWS_AS(prune_with_scores(bad, w, SparsityPattern::unstructured(0.5)),
                  ValidationError);

  ScoreMatrix wrong_shape(2, 3);
  CHECK_THROWS_AS(prune_with_scores(wrong_shape, w, SparsityPattern::unstructured(0.5)),
                  ValidationError);
}
