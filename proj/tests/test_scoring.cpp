#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nowag/normalization.hpp"
#include "nowag/scoring.hpp"
#include "test_util.hpp"

using namespace nowag;

TEST_CASE("squared-entry scores on a hand example") {
  // scores[i,j] = m[i,j]^2 * h[j] with m = [[1,2],[3,4]] and h = [3,5].
  DenseMatrix m(2, 2, {1.0f, 2.0f, 3.0f, 4.0f});
  HessianDiagonal h(2, {3.0, 5.0});
  ScoreMatrix s = nowag_scores(m, h);
  CHECK(s.at(0, 0) == 3.0);
  CHECK(s.at(0, 1) == 20.0);
  CHECK(s.at(1, 0) == 27.0);
  CHECK(s.at(1, 1) == 80.0);
}

TEST_CASE("magnitude-times-activation-norm scores on a hand example") {
  DenseMatrix m(2, 2, {1.0f, -2.0f, 3.0f, 4.0f});
  HessianDiagonal h(2, {3.0, 5.0});
  ScoreMatrix s = wanda_scores(m, h);
  CHECK(s.at(0, 0) == doctest::Approx(std::sqrt(3.0)));
  CHECK(s.at(0, 1) == doctest::Approx(2.0 * std::sqrt(5.0)));
  CHECK(s.at(1, 0) == doctest::Approx(3.0 * std::sqrt(3.0)));
  CHECK(s.at(1, 1) == doctest::Approx(4.0 * std::sqrt(5.0)));
}

TEST_CASE("both scores rank entries identically") {
  // The squared form is a monotone transform of |m| * sqrt(h), so sorting
  // flat indices by either score gives the same permutation.
  DenseMatrix m = testutil::random_matrix(6, 9, 91);
  HessianDiagonal h = testutil::random_hessian(9, 92);
  ScoreMatrix a = nowag_scores(m, h);
  ScoreMatrix b = wanda_scores(m, h);

  std::vector<std::size_t> pa(a.size()), pb(b.size());
  std::iota(pa.begin(), pa.end(), 0u);
  std::iota(pb.begin(), pb.end(), 0u);
  auto by = [](const ScoreMatrix& s) {
    return [&s](std::size_t x, std::size_t y) {
      return s.scores[x] != s.scores[y] ? s.scores[x] < s.scores[y] : x < y;
    };
  };
  std::sort(pa.begin(), pa.end(), by(a));
  std::sort(pb.begin(), pb.end(), by(b));
  CHECK(pa == pb);
}

TEST_CASE("diagonal proxy loss on a hand example") {
  // A = [[1,1]], B = [[0,1]], h = [3,5]: only entry 0 differs, cost 1^2 * 3.
  DenseMatrix a(1, 2, {1.0f, 1.0f});
  DenseMatrix b(1, 2, {0.0f, 1.0f});
  HessianDiagonal h(2, {3.0, 5.0});
  CHECK(proxy_loss_diag(a, b, h) == 3.0);
  CHECK(proxy_loss_diag(a, a, h) == 0.0);
}

TEST_CASE("trace-form loss with a diagonal moment matrix reduces to the diagonal loss") {
  DenseMatrix a = testutil::random_matrix(5, 6, 93);
  DenseMatrix b = testutil::random_matrix(5, 6, 94);
  HessianDiagonal h = testutil::random_hessian(6, 95);
  DenseMatrix full(6, 6);
  for (std::size_t j = 0; j < 6; ++j) full.at(j, j) = static_cast<float>(h.weights[j]);
  // Re-read the diagonal from the float matrix so both sides use identical
  // coefficients.
  HessianDiagonal hf(6);
  for (std::size_t j = 0; j < 6; ++j) hf.weights[j] = full.at(j, j);
  CHECK(proxy_loss_full(a, b, full) ==
        doctest::Approx(proxy_loss_diag(a, b, hf)).epsilon(1e-12));
}

TEST_CASE("trace-form loss equals the average squared activation error") {
  // tr((A-B) H (A-B)^T) with H = (1/m) X^T X is (1/m) sum_t |(A-B) x_t|^2.
  DenseMatrix a = testutil::random_matrix(4, 7, 96);
  DenseMatrix b = testutil::random_matrix(4, 7, 97);
  DenseMatrix acts = testutil::random_matrix(25, 7, 98, -2.0f, 2.0f);
  DenseMatrix full = full_sample_hessian(ActivationBatch(acts));

  double direct = 0.0;
  for (std::size_t t = 0; t < 25; ++t) {
    for (std::size_t i = 0; i < 4; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < 7; ++j) {
        dot += (static_cast<double>(a.at(i, j)) - b.at(i, j)) *
               static_cast<double>(acts.at(t, j));
      }
      direct += dot * dot;
    }
  }
  direct /= 25.0;
  CHECK(testutil::rel_err(proxy_loss_full(a, b, full), direct) < 1e-5);
}

TEST_CASE("asymmetric moment matrices are rejected") {
  DenseMatrix a(2, 2), b(2, 2);
  DenseMatrix h(2, 2, {1.0f, 0.5f, 0.6f, 1.0f});
  CHECK_THROWS_WITH_AS(proxy_loss_full(a, b, h), doctest::Contains("symmetric"),
                       ValidationError);
}

TEST_CASE("score and loss shape mismatches are rejected") {
  DenseMatrix a(2, 3), b(3, 2);
  HessianDiagonal h3(3, {1.0, 1.0, 1.0});
  HessianDiagonal h2(2, {1.0, 1.0});
  CHECK_THROWS_AS(proxy_loss_diag(a, b, h3), ValidationError);
  CHECK_THROWS_AS(nowag_scores(a, h2), ValidationError);
  CHECK_THROWS_AS(wanda_scores(a, h2), ValidationError);
  DenseMatrix h_wrong(2, 2);
  CHECK_THROWS_AS(proxy_loss_full(a, a, h_wrong), ValidationError);
}
