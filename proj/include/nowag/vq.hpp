#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "nowag/calibration.hpp"
#include "nowag/normalization.hpp"
#include "nowag/types.hpp"

namespace nowag {

enum class EmptyClusterPolicy : std::uint8_t { kReseedFarthest = 0 };

struct VQConfig {
  std::size_t subvec_dim = 6;          // d: entries per subvector
  double bits_target = 2.0;            // n_bits: requested index bits per value
  std::size_t n_iter = 100;            // Lloyd iteration budget
  std::uint64_t seed = 0;
  std::size_t init_subsample = 65536;  // candidate pool cap for seeding
  EmptyClusterPolicy empty_policy = EmptyClusterPolicy::kReseedFarthest;
};

// 2^round(n_bits * d), the codebook size the bit budget pays for. Rounded to
// the nearest integer exponent before exponentiation.
std::uint64_t codebook_size(double n_bits, std::size_t d);

struct Codebook {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<float> centroids;  // row-major, k x dim

  float at(std::size_t l, std::size_t j) const { return centroids[l * dim + j]; }
};

struct Assignments {
  std::size_t count = 0;
  std::vector<std::uint32_t> indices;  // one codebook row per subvector
};

// A normalized matrix cut into length-d subvectors (row-major groups of d
// consecutive columns) together with the per-entry weights inherited from
// the calibration diagonal. weights[i*dim+j] is the weight of dimension j of
// subvector i; pad columns carry weight 0.
struct SubvectorSet {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<double> weights;
};

struct QuantizedMatrix {
  std::size_t rows = 0;        // d_out
  std::size_t cols = 0;        // d_in (pre-padding)
  std::size_t padded_cols = 0; // multiple of subvec_dim, padded_cols - cols < subvec_dim
  std::size_t subvec_dim = 0;
  Codebook codebook;
  Assignments assignments;     // rows * padded_cols / subvec_dim entries
  NormScales scales;
};

// Appends constant columns holding the scalar mean of all entries until the
// column count is a multiple of d. Returns the padded matrix and its width.
std::pair<DenseMatrix, std::size_t> pad_for_vq(const DenseMatrix& normalized,
                                               std::size_t d);

// Zero-extends the diagonal to the padded width; pad channels get weight 0.
HessianDiagonal zero_extend(const HessianDiagonal& h, std::size_t new_dim);

SubvectorSet reshape_subvectors(const DenseMatrix& padded,
                                const HessianDiagonal& h_padded, std::size_t d);

// Inverse of the reshape: lays subvector values back into a rows x
// padded_cols matrix.
DenseMatrix subvectors_to_matrix(const std::vector<double>& values,
                                 std::size_t count, std::size_t dim,
                                 std::size_t rows, std::size_t padded_cols);

// Weighted k-means++ seeding. The candidate pool is a uniform subsample of
// at most `subsample` subvectors; the first centroid is uniform over the
// pool and each later one is drawn with probability proportional to its
// current weighted squared distance to the chosen set. Deterministic given
// the seed. Requires k <= pool size.
Codebook kmeanspp_init(const SubvectorSet& sv, std::size_t k, std::uint64_t seed,
                       std::size_t subsample);

// Assignment half-step against a fixed codebook: each subvector goes to the
// centroid minimizing sum_j w[j] * (x[j] - c[j])^2, ties to the lowest
// centroid index. Zero-weight dimensions cannot influence the choice.
Assignments assign_subvectors(const SubvectorSet& sv, const Codebook& cb);

// Observer for the optimization trajectory. `after_update == false` means
// the state right after an assignment half-step, true right after the
// centroid update. `centroids` is the internal double-precision state,
// row-major k x dim. `objective` is sum_i w_i . (x_i - c_{A_i})^2 evaluated
// at that state.
struct KMeansStep {
  std::size_t iteration = 0;  // 1-based
  bool after_update = false;
  double objective = 0.0;
  const std::vector<std::uint32_t>* assignments = nullptr;
  const std::vector<double>* centroids = nullptr;
};
using KMeansObserver = std::function<void(const KMeansStep&)>;

struct KMeansResult {
  Codebook codebook;
  Assignments assignments;
  double objective = 0.0;     // final weighted objective
  std::size_t iterations = 0; // iterations actually run
};

// Lloyd iterations on the weighted objective sum_i sum_j w[i,j] *
// (x[i,j] - C[A_i, j])^2. Per iteration: assignment half-step, then centroid
// update C[l,j] = sum w x / sum w over members (unweighted mean where the
// member weight sum is zero, which arises from zero-padded calibration
// channels). Empty clusters are reseeded to the subvector farthest from its
// assigned centroid (ties to the lowest subvector index). Stops after n_iter
// iterations or when assignments stop changing. Fully deterministic given
// the seed; accumulation order is fixed.
KMeansResult weighted_kmeans(const SubvectorSet& sv, std::size_t k,
                             std::size_t n_iter, std::uint64_t seed,
                             EmptyClusterPolicy policy,
                             std::size_t init_subsample = 65536,
                             const KMeansObserver* observer = nullptr);

struct QuantizeResult {
  QuantizedMatrix qm;
  double objective = 0.0;
  std::size_t iterations = 0;
};

// Full pipeline: normalize, pad, reshape, cluster, package. The codebook
// size from the bit budget is clamped to the seeding pool when the matrix
// has fewer subvectors than requested centroids.
QuantizeResult quantize(const DenseMatrix& w, const HessianDiagonal& h,
                        const VQConfig& cfg, double epsilon = kDefaultEpsilon);

// Decodes the assignment grid back to a dense matrix, dropping pad columns.
// renormalize == true multiplies the stored scales back in.
DenseMatrix dequantize(const QuantizedMatrix& qm, bool renormalize);

struct BpvBreakdown {
  double index_bits = 0.0;     // assignment indices per original value
  double codebook_bits = 0.0;  // codebook amortized per original value
  double scale_bits = 0.0;     // the two scale vectors per original value
  double total = 0.0;
};

BpvBreakdown bits_per_value_breakdown(std::size_t rows, std::size_t cols,
                                      std::size_t padded_cols, std::size_t d,
                                      std::uint64_t k,
                                      unsigned scale_bits = 16,
                                      unsigned codebook_bits = 16);

// (N_sub * ceil(log2 K) + K * d * codebook_bits + (rows + cols) * scale_bits)
// / (rows * cols). Storage on disk is binary32; the accounting counts scales
// and codebook entries at the configurable widths (16 by default).
double bits_per_value(const QuantizedMatrix& qm, unsigned scale_bits = 16,
                      unsigned codebook_bits = 16);

void validate_quantized(const QuantizedMatrix& qm);

}  // namespace nowag
