#include "nowag/calibration.hpp"

#include <cmath>

namespace nowag {

namespace {

void require_finite_acts(const ActivationBatch& acts) {
  for (std::size_t i = 0; i < acts.data.size(); ++i) {
    if (!std::isfinite(acts.data[i])) {
      throw ValidationError("activations: non-finite value at flat index " + std::to_string(i));
    }
  }
}

}  // namespace

HessianDiagonal compute_hessian_diag(const ActivationBatch& acts) {
  HessianDiagonal h(acts.dim);
  accumulate_hessian_diag(h, acts);
  return h;
}

void accumulate_hessian_diag(HessianDiagonal& state, const ActivationBatch& chunk) {
  if (state.dim != chunk.dim) {
    throw ValidationError("accumulate_hessian_diag: chunk dim " + std::to_string(chunk.dim) +
                          " != state dim " + std::to_string(state.dim));
  }
  require_finite_acts(chunk);
  for (std::size_t t = 0; t < chunk.samples; ++t) {
    const float* row = chunk.data.data() + t * chunk.dim;
    for (std::size_t j = 0; j < chunk.dim; ++j) {
      double x = row[j];
      state.weights[j] += x * x;
    }
  }
}

DenseMatrix full_sample_hessian(const ActivationBatch& acts) {
  if (acts.samples == 0) {
    throw ValidationError("full_sample_hessian: empty batch");
  }
  require_finite_acts(acts);
  std::size_t d = acts.dim;
  std::vector<double> sums(d * d, 0.0);
  for (std::size_t t = 0; t < acts.samples; ++t) {
    const float* row = acts.data.data() + t * d;
    for (std::size_t j = 0; j < d; ++j) {
      double xj = row[j];
      for (std::size_t k = j; k < d; ++k) {
        sums[j * d + k] += xj * static_cast<double>(row[k]);
      }
    }
  }
  DenseMatrix out(d, d);
  double inv_m = 1.0 / static_cast<double>(acts.samples);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j; k < d; ++k) {
      float v = static_cast<float>(sums[j * d + k] * inv_m);
      out.at(j, k) = v;
      out.at(k, j) = v;  // mirrored, so symmetry is exact
    }
  }
  return out;
}

void validate_hessian_diag(const HessianDiagonal& h, std::size_t expected_dim) {
  if (h.dim != expected_dim) {
    throw ValidationError("hessian diagonal: dim " + std::to_string(h.dim) +
                          " != expected " + std::to_string(expected_dim));
  }
  for (std::size_t j = 0; j < h.dim; ++j) {
    if (!std::isfinite(h.weights[j]) || h.weights[j] < 0.0) {
      throw ValidationError("hessian diagonal: entry " + std::to_string(j) +
                            " is negative or non-finite");
    }
  }
}

}  // namespace nowag
