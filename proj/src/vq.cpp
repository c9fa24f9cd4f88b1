#include "nowag/vq.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

namespace nowag {

namespace {

// Sampling primitives. These are pinned (engine draws and mapping) because
// bit-for-bit reproducibility across runs is part of the contract:
//   - integers: rejection sampling on raw mt19937_64 draws, no modulo bias
//   - unit doubles: top 53 bits of one draw, value in [0, 1)
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Candidate pool: a uniform subsample without replacement, taken as the
// first `take` entries of a partial Fisher-Yates pass over the identity.
std::vector<std::size_t> subsample_pool(std::size_t count, std::size_t take,
                                        std::mt19937_64& rng) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  if (take >= count) return idx;
  for (std::size_t i = 0; i < take; ++i) {
    std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, count - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  return idx;
}

double weighted_sqdist(const double* x, const double* w, const double* c, std::size_t d) {
  double acc = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double t = x[j] - c[j];
    acc += w[j] * t * t;
  }
  return acc;
}

void validate_subvectors(const SubvectorSet& sv) {
  if (sv.dim == 0) {
    throw ValidationError("subvectors: dim must be >= 1");
  }
  if (sv.values.size() != sv.count * sv.dim || sv.weights.size() != sv.count * sv.dim) {
    throw ValidationError("subvectors: value/weight buffers do not match count x dim");
  }
  for (std::size_t i = 0; i < sv.values.size(); ++i) {
    if (!std::isfinite(sv.values[i])) {
      throw ValidationError("subvectors: non-finite value at flat index " + std::to_string(i));
    }
    if (!std::isfinite(sv.weights[i]) || sv.weights[i] < 0.0) {
      throw ValidationError("subvectors: negative or non-finite weight at flat index " +
                            std::to_string(i));
    }
  }
}

// Seeding and iteration share one rng stream; draws happen in pool order.
std::vector<std::size_t> kmeanspp_indices(const SubvectorSet& sv, std::size_t k,
                                          std::size_t subsample, std::mt19937_64& rng) {
  if (k < 1) {
    throw ValidationError("kmeanspp: k must be >= 1");
  }
  if (subsample < 1) {
    throw ValidationError("kmeanspp: subsample must be >= 1");
  }
  std::vector<std::size_t> pool = subsample_pool(sv.count, subsample, rng);
  if (k > pool.size()) {
    throw ValidationError("kmeanspp: k = " + std::to_string(k) +
                          " exceeds candidate pool of " + std::to_string(pool.size()) +
                          " subvectors");
  }

  std::size_t d = sv.dim;
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  std::vector<char> is_chosen(pool.size(), 0);

  std::size_t first = static_cast<std::size_t>(uniform_index(rng, pool.size()));
  chosen.push_back(pool[first]);
  is_chosen[first] = 1;

  // mindist[p]: weighted squared distance from pool member p to the chosen
  // set, under p's own weights.
  std::vector<double> mindist(pool.size());
  for (std::size_t p = 0; p < pool.size(); ++p) {
    std::size_t i = pool[p];
    mindist[p] = weighted_sqdist(sv.values.data() + i * d, sv.weights.data() + i * d,
                                 sv.values.data() + chosen[0] * d, d);
  }

  while (chosen.size() < k) {
    double total = 0.0;
    for (std::size_t p = 0; p < pool.size(); ++p) total += mindist[p];

    std::size_t pick = pool.size();
    if (total > 0.0) {
      double u = uniform_unit(rng) * total;
      double acc = 0.0;
      std::size_t last_positive = pool.size();
      for (std::size_t p = 0; p < pool.size(); ++p) {
        if (mindist[p] <= 0.0) continue;
        last_positive = p;
        acc += mindist[p];
        if (u < acc) {
          pick = p;
          break;
        }
      }
      if (pick == pool.size()) pick = last_positive;  // rounding spill
    } else {
      // All candidates coincide with a chosen centroid; fall back to a
      // uniform pick over the not-yet-chosen so k == pool still yields a
      // permutation of the pool.
      std::vector<std::size_t> open;
      for (std::size_t p = 0; p < pool.size(); ++p) {
        if (!is_chosen[p]) open.push_back(p);
      }
      pick = open[static_cast<std::size_t>(uniform_index(rng, open.size()))];
    }

    is_chosen[pick] = 1;
    chosen.push_back(pool[pick]);
    const double* c = sv.values.data() + chosen.back() * d;
    for (std::size_t p = 0; p < pool.size(); ++p) {
      std::size_t i = pool[p];
      double dist = weighted_sqdist(sv.values.data() + i * d, sv.weights.data() + i * d, c, d);
      if (dist < mindist[p]) mindist[p] = dist;
    }
  }
  return chosen;
}

}  // namespace

std::uint64_t codebook_size(double n_bits, std::size_t d) {
  if (d < 1) {
    throw ValidationError("codebook_size: subvector dim must be >= 1");
  }
  if (!(n_bits > 0.0) || !std::isfinite(n_bits)) {
    throw ValidationError("codebook_size: bits per value must be finite and > 0");
  }
  long long exponent = std::llround(n_bits * static_cast<double>(d));
  if (exponent < 0) exponent = 0;
  if (exponent > 26) {
    throw ValidationError("codebook_size: 2^" + std::to_string(exponent) +
                          " centroids does not fit addressable memory");
  }
  return std::uint64_t{1} << exponent;
}

std::pair<DenseMatrix, std::size_t> pad_for_vq(const DenseMatrix& normalized, std::size_t d) {
  if (d < 1) {
    throw ValidationError("pad_for_vq: subvector dim must be >= 1");
  }
  require_finite(normalized, "pad_for_vq input");
  std::size_t rem = normalized.cols % d;
  if (rem == 0) {
    return {normalized, normalized.cols};
  }
  std::size_t padded_cols = normalized.cols + (d - rem);
  double sum = 0.0;
  for (float v : normalized.data) sum += v;
  float fill = normalized.size() == 0
                   ? 0.0f
                   : static_cast<float>(sum / static_cast<double>(normalized.size()));
  DenseMatrix out(normalized.rows, padded_cols);
  for (std::size_t i = 0; i < normalized.rows; ++i) {
    for (std::size_t j = 0; j < normalized.cols; ++j) {
      out.at(i, j) = normalized.at(i, j);
    }
    for (std::size_t j = normalized.cols; j < padded_cols; ++j) {
      out.at(i, j) = fill;
    }
  }
  return {std::move(out), padded_cols};
}

HessianDiagonal zero_extend(const HessianDiagonal& h, std::size_t new_dim) {
  if (new_dim < h.dim) {
    throw ValidationError("zero_extend: new dim smaller than current");
  }
  HessianDiagonal out(new_dim);
  for (std::size_t j = 0; j < h.dim; ++j) out.weights[j] = h.weights[j];
  return out;
}

SubvectorSet reshape_subvectors(const DenseMatrix& padded, const HessianDiagonal& h_padded,
                                std::size_t d) {
  if (d < 1 || padded.cols % d != 0) {
    throw ValidationError("reshape_subvectors: cols " + std::to_string(padded.cols) +
                          " not a multiple of subvector dim " + std::to_string(d));
  }
  validate_hessian_diag(h_padded, padded.cols);
  SubvectorSet sv;
  sv.dim = d;
  std::size_t groups = padded.cols / d;
  sv.count = padded.rows * groups;
  sv.values.resize(sv.count * d);
  sv.weights.resize(sv.count * d);
  for (std::size_t i = 0; i < padded.rows; ++i) {
    for (std::size_t g = 0; g < groups; ++g) {
      std::size_t base = (i * groups + g) * d;
      for (std::size_t t = 0; t < d; ++t) {
        sv.values[base + t] = padded.at(i, g * d + t);
        sv.weights[base + t] = h_padded.weights[g * d + t];
      }
    }
  }
  return sv;
}

DenseMatrix subvectors_to_matrix(const std::vector<double>& values, std::size_t count,
                                 std::size_t dim, std::size_t rows, std::size_t padded_cols) {
  if (dim == 0 || padded_cols % dim != 0 || count * dim != rows * padded_cols ||
      values.size() != count * dim) {
    throw ValidationError("subvectors_to_matrix: inconsistent layout");
  }
  DenseMatrix out(rows, padded_cols);
  std::size_t groups = padded_cols / dim;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t g = 0; g < groups; ++g) {
      std::size_t base = (i * groups + g) * dim;
      for (std::size_t t = 0; t < dim; ++t) {
        out.at(i, g * dim + t) = static_cast<float>(values[base + t]);
      }
    }
  }
  return out;
}

Codebook kmeanspp_init(const SubvectorSet& sv, std::size_t k, std::uint64_t seed,
                       std::size_t subsample) {
  validate_subvectors(sv);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen = kmeanspp_indices(sv, k, subsample, rng);
  Codebook cb;
  cb.k = k;
  cb.dim = sv.dim;
  cb.centroids.resize(k * sv.dim);
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t j = 0; j < sv.dim; ++j) {
      cb.centroids[l * sv.dim + j] = static_cast<float>(sv.values[chosen[l] * sv.dim + j]);
    }
  }
  return cb;
}

Assignments assign_subvectors(const SubvectorSet& sv, const Codebook& cb) {
  validate_subvectors(sv);
  if (cb.dim != sv.dim || cb.k < 1) {
    throw ValidationError("assign_subvectors: codebook dim mismatch or empty codebook");
  }
  std::vector<double> cents(cb.centroids.begin(), cb.centroids.end());
  Assignments a;
  a.count = sv.count;
  a.indices.resize(sv.count);
  for (std::size_t i = 0; i < sv.count; ++i) {
    const double* x = sv.values.data() + i * sv.dim;
    const double* w = sv.weights.data() + i * sv.dim;
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_l = 0;
    for (std::size_t l = 0; l < cb.k; ++l) {
      double dist = weighted_sqdist(x, w, cents.data() + l * sv.dim, sv.dim);
      if (dist < best) {
        best = dist;
        best_l = static_cast<std::uint32_t>(l);
      }
    }
    a.indices[i] = best_l;
  }
  return a;
}

KMeansResult weighted_kmeans(const SubvectorSet& sv, std::size_t k, std::size_t n_iter,
                             std::uint64_t seed, EmptyClusterPolicy policy,
                             std::size_t init_subsample, const KMeansObserver* observer) {
  validate_subvectors(sv);
  if (n_iter < 1) {
    throw ValidationError("weighted_kmeans: n_iter must be >= 1");
  }
  if (policy != EmptyClusterPolicy::kReseedFarthest) {
    throw ValidationError("weighted_kmeans: unknown empty-cluster policy");
  }
  std::size_t d = sv.dim;
  std::size_t n = sv.count;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen = kmeanspp_indices(sv, k, init_subsample, rng);
  std::vector<double> cents(k * d);
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t j = 0; j < d; ++j) cents[l * d + j] = sv.values[chosen[l] * d + j];
  }

  std::vector<std::uint32_t> assign(n, 0);
  std::vector<std::uint32_t> prev_assign;
  std::vector<double> dist_to_assigned(n, 0.0);
  std::vector<double> num(k * d), den(k * d), usum(k * d);
  std::vector<std::size_t> members(k);
  double objective = 0.0;
  std::size_t iterations = 0;

  for (std::size_t iter = 1; iter <= n_iter; ++iter) {
    iterations = iter;

    for (std::size_t i = 0; i < n; ++i) {
      const double* x = sv.values.data() + i * d;
      const double* w = sv.weights.data() + i * d;
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t best_l = 0;
      for (std::size_t l = 0; l < k; ++l) {
        double dist = weighted_sqdist(x, w, cents.data() + l * d, d);
        if (dist < best) {
          best = dist;
          best_l = static_cast<std::uint32_t>(l);
        }
      }
      assign[i] = best_l;
      dist_to_assigned[i] = best;
    }
    objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) objective += dist_to_assigned[i];
    if (observer) {
      (*observer)(KMeansStep{iter, false, objective, &assign, &cents});
    }

    std::fill(num.begin(), num.end(), 0.0);
    std::fill(den.begin(), den.end(), 0.0);
    std::fill(usum.begin(), usum.end(), 0.0);
    std::fill(members.begin(), members.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t l = assign[i];
      const double* x = sv.values.data() + i * d;
      const double* w = sv.weights.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) {
        num[l * d + j] += w[j] * x[j];
        den[l * d + j] += w[j];
        usum[l * d + j] += x[j];
      }
      members[l] += 1;
    }
    for (std::size_t l = 0; l < k; ++l) {
      if (members[l] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) {
        // Zero weight sum happens on zero-padded calibration channels when
        // every member of the cluster has weight 0 there; the weighted mean
        // is undefined, so fall back to the plain mean.
        if (den[l * d + j] > 0.0) {
          cents[l * d + j] = num[l * d + j] / den[l * d + j];
        } else {
          cents[l * d + j] = usum[l * d + j] / static_cast<double>(members[l]);
        }
      }
    }
    // Empty clusters move to the subvector farthest from its assigned
    // centroid (distances from this iteration's assignment pass; ties to
    // the lowest subvector index). The relocated centroid has no members,
    // so the objective is untouched by the move.
    for (std::size_t l = 0; l < k; ++l) {
      if (members[l] != 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (dist_to_assigned[i] > dist_to_assigned[far]) far = i;
      }
      for (std::size_t j = 0; j < d; ++j) cents[l * d + j] = sv.values[far * d + j];
      dist_to_assigned[far] = 0.0;
    }

    objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      objective += weighted_sqdist(sv.values.data() + i * d, sv.weights.data() + i * d,
                                   cents.data() + assign[i] * d, d);
    }
    if (observer) {
      (*observer)(KMeansStep{iter, true, objective, &assign, &cents});
    }

    if (!prev_assign.empty() && prev_assign == assign) break;
    prev_assign = assign;
  }

  KMeansResult res;
  res.codebook.k = k;
  res.codebook.dim = d;
  res.codebook.centroids.resize(k * d);
  for (std::size_t p = 0; p < k * d; ++p) {
    res.codebook.centroids[p] = static_cast<float>(cents[p]);
  }
  res.assignments.count = n;
  res.assignments.indices = std::move(assign);
  res.objective = objective;
  res.iterations = iterations;
  return res;
}

QuantizeResult quantize(const DenseMatrix& w, const HessianDiagonal& h, const VQConfig& cfg,
                        double epsilon) {
  validate_hessian_diag(h, w.cols);
  if (cfg.init_subsample < 1) {
    throw ValidationError("quantize: init_subsample must be >= 1");
  }
  std::uint64_t k_target = codebook_size(cfg.bits_target, cfg.subvec_dim);

  NormalizeResult norm = normalize(w, epsilon);
  auto [padded, padded_cols] = pad_for_vq(norm.normalized, cfg.subvec_dim);
  HessianDiagonal h_padded = zero_extend(h, padded_cols);
  SubvectorSet sv = reshape_subvectors(padded, h_padded, cfg.subvec_dim);
  if (sv.count == 0) {
    throw ValidationError("quantize: matrix has no subvectors");
  }

  // The bit budget can ask for more centroids than there are subvectors
  // (small matrices); the codebook is clamped to the seeding pool so every
  // centroid can be a distinct subvector.
  std::size_t pool = std::min(sv.count, cfg.init_subsample);
  std::size_t k = static_cast<std::size_t>(std::min<std::uint64_t>(k_target, pool));

  KMeansResult km = weighted_kmeans(sv, k, cfg.n_iter, cfg.seed, cfg.empty_policy,
                                    cfg.init_subsample);

  QuantizeResult out;
  out.qm.rows = w.rows;
  out.qm.cols = w.cols;
  out.qm.padded_cols = padded_cols;
  out.qm.subvec_dim = cfg.subvec_dim;
  out.qm.codebook = std::move(km.codebook);
  out.qm.assignments = std::move(km.assignments);
  out.qm.scales = std::move(norm.scales);
  out.objective = km.objective;
  out.iterations = km.iterations;
  validate_quantized(out.qm);
  return out;
}

DenseMatrix dequantize(const QuantizedMatrix& qm, bool renormalize_output) {
  validate_quantized(qm);
  std::size_t d = qm.subvec_dim;
  std::size_t groups = qm.padded_cols / d;
  DenseMatrix out(qm.rows, qm.cols);
  for (std::size_t i = 0; i < qm.rows; ++i) {
    for (std::size_t g = 0; g < groups; ++g) {
      const float* c = qm.codebook.centroids.data() +
                       static_cast<std::size_t>(qm.assignments.indices[i * groups + g]) * d;
      std::size_t col0 = g * d;
      for (std::size_t t = 0; t < d && col0 + t < qm.cols; ++t) {
        out.at(i, col0 + t) = c[t];
      }
    }
  }
  if (renormalize_output) {
    return denormalize(out, qm.scales);
  }
  return out;
}

BpvBreakdown bits_per_value_breakdown(std::size_t rows, std::size_t cols,
                                      std::size_t padded_cols, std::size_t d, std::uint64_t k,
                                      unsigned scale_bits, unsigned codebook_bits) {
  if (rows == 0 || cols == 0) {
    throw ValidationError("bits_per_value: empty matrix has no per-value accounting");
  }
  if (d == 0 || padded_cols % d != 0 || k == 0) {
    throw ValidationError("bits_per_value: inconsistent quantizer geometry");
  }
  double values = static_cast<double>(rows) * static_cast<double>(cols);
  double n_sub = static_cast<double>(rows) * (static_cast<double>(padded_cols) / d);
  unsigned index_width = k == 1 ? 0u : static_cast<unsigned>(std::bit_width(k - 1));
  BpvBreakdown b;
  b.index_bits = n_sub * index_width / values;
  b.codebook_bits = static_cast<double>(k) * d * codebook_bits / values;
  b.scale_bits = (static_cast<double>(rows) + static_cast<double>(cols)) * scale_bits / values;
  b.total = b.index_bits + b.codebook_bits + b.scale_bits;
  return b;
}

double bits_per_value(const QuantizedMatrix& qm, unsigned scale_bits, unsigned codebook_bits) {
  return bits_per_value_breakdown(qm.rows, qm.cols, qm.padded_cols, qm.subvec_dim,
                                  qm.codebook.k, scale_bits, codebook_bits)
      .total;
}

void validate_quantized(const QuantizedMatrix& qm) {
  if (qm.subvec_dim < 1) {
    throw ValidationError("quantized matrix: subvector dim must be >= 1");
  }
  if (qm.padded_cols % qm.subvec_dim != 0) {
    throw ValidationError("quantized matrix: padded cols " + std::to_string(qm.padded_cols) +
                          " not a multiple of subvector dim " + std::to_string(qm.subvec_dim));
  }
  if (qm.padded_cols < qm.cols || qm.padded_cols - qm.cols >= qm.subvec_dim) {
    throw ValidationError("quantized matrix: padded cols " + std::to_string(qm.padded_cols) +
                          " inconsistent with cols " + std::to_string(qm.cols));
  }
  std::size_t n_sub = qm.rows * (qm.padded_cols / qm.subvec_dim);
  if (qm.assignments.count != n_sub || qm.assignments.indices.size() != n_sub) {
    throw ValidationError("quantized matrix: expected " + std::to_string(n_sub) +
                          " assignments, have " + std::to_string(qm.assignments.indices.size()));
  }
  if (qm.codebook.k < 1 || qm.codebook.dim != qm.subvec_dim ||
      qm.codebook.centroids.size() != qm.codebook.k * qm.codebook.dim) {
    throw ValidationError("quantized matrix: malformed codebook");
  }
  for (float c : qm.codebook.centroids) {
    if (!std::isfinite(c)) {
      throw ValidationError("quantized matrix: non-finite codebook entry");
    }
  }
  for (std::size_t i = 0; i < n_sub; ++i) {
    if (qm.assignments.indices[i] >= qm.codebook.k) {
      throw ValidationError("quantized matrix: assignment " + std::to_string(i) +
                            " references centroid " + std::to_string(qm.assignments.indices[i]) +
                            " outside codebook of " + std::to_string(qm.codebook.k));
    }
  }
  if (qm.scales.col_scales.size() != qm.cols || qm.scales.row_scales.size() != qm.rows) {
    throw ValidationError("quantized matrix: scale vector lengths do not match shape");
  }
  for (float s : qm.scales.col_scales) {
    if (!(s > 0.0f) || !std::isfinite(s)) {
      throw ValidationError("quantized matrix: column scale not positive and finite");
    }
  }
  for (float s : qm.scales.row_scales) {
    if (!(s > 0.0f) || !std::isfinite(s)) {
      throw ValidationError("quantized matrix: row scale not positive and finite");
    }
  }
}

}  // namespace nowag
