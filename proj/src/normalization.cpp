#include "nowag/normalization.hpp"

#include <cmath>

namespace nowag {

namespace {

// norm + eps cast to the stored width; a zero effective scale is degenerate
// either way (eps == 0 on zero data, or an underflowing cast).
float effective_scale(double norm, double eps, const char* axis, std::size_t index) {
  float scale = static_cast<float>(norm + eps);
  if (!(scale > 0.0f)) {
    throw ValidationError(std::string("normalize: ") + axis + " " + std::to_string(index) +
                          " has zero norm and epsilon is zero; pass epsilon > 0 or drop the " +
                          axis);
  }
  return scale;
}

void check_scales(const NormScales& s, std::size_t rows, std::size_t cols, const char* op) {
  if (s.col_scales.size() != cols || s.row_scales.size() != rows) {
    throw ValidationError(std::string(op) + ": scales sized " + std::to_string(s.row_scales.size()) +
                          "x" + std::to_string(s.col_scales.size()) + " do not match matrix " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  for (std::size_t j = 0; j < s.col_scales.size(); ++j) {
    if (!(s.col_scales[j] > 0.0f) || !std::isfinite(s.col_scales[j])) {
      throw ValidationError(std::string(op) + ": column scale " + std::to_string(j) +
                            " is not positive and finite");
    }
  }
  for (std::size_t i = 0; i < s.row_scales.size(); ++i) {
    if (!(s.row_scales[i] > 0.0f) || !std::isfinite(s.row_scales[i])) {
      throw ValidationError(std::string(op) + ": row scale " + std::to_string(i) +
                            " is not positive and finite");
    }
  }
}

}  // namespace

NormalizeResult normalize(const DenseMatrix& w, double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("normalize: epsilon must be finite and >= 0");
  }
  require_finite(w, "normalize input");

  NormalizeResult out;
  out.normalized = w;
  out.scales.epsilon = epsilon;
  out.scales.col_scales.resize(w.cols);
  out.scales.row_scales.resize(w.rows);
  DenseMatrix& m = out.normalized;

  for (std::size_t j = 0; j < w.cols; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < w.rows; ++i) {
      double v = m.at(i, j);
      ss += v * v;
    }
    float scale = effective_scale(std::sqrt(ss), epsilon, "column", j);
    out.scales.col_scales[j] = scale;
    for (std::size_t i = 0; i < w.rows; ++i) {
      m.at(i, j) = static_cast<float>(m.at(i, j) / static_cast<double>(scale));
    }
  }

  for (std::size_t i = 0; i < w.rows; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) {
      double v = m.at(i, j);
      ss += v * v;
    }
    float scale = effective_scale(std::sqrt(ss), epsilon, "row", i);
    out.scales.row_scales[i] = scale;
    for (std::size_t j = 0; j < w.cols; ++j) {
      m.at(i, j) = static_cast<float>(m.at(i, j) / static_cast<double>(scale));
    }
  }
  return out;
}

DenseMatrix denormalize(const DenseMatrix& m, const NormScales& scales) {
  check_scales(scales, m.rows, m.cols, "denormalize");
  DenseMatrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double row_scale = scales.row_scales[i];
    for (std::size_t j = 0; j < m.cols; ++j) {
      out.at(i, j) = static_cast<float>(m.at(i, j) * row_scale *
                                        static_cast<double>(scales.col_scales[j]));
    }
  }
  return out;
}

DenseMatrix renormalize(const DenseMatrix& w, const NormScales& scales) {
  check_scales(scales, w.rows, w.cols, "renormalize");
  DenseMatrix out(w.rows, w.cols);
  for (std::size_t i = 0; i < w.rows; ++i) {
    double row_scale = scales.row_scales[i];
    for (std::size_t j = 0; j < w.cols; ++j) {
      out.at(i, j) = static_cast<float>(w.at(i, j) / (row_scale *
                                        static_cast<double>(scales.col_scales[j])));
    }
  }
  return out;
}

DenseVector apply_inference(const DenseVector& x, const DenseMatrix& m,
                            const NormScales& scales) {
  check_scales(scales, m.rows, m.cols, "apply_inference");
  if (x.len != m.cols) {
    throw ValidationError("apply_inference: input length " + std::to_string(x.len) +
                          " != matrix cols " + std::to_string(m.cols));
  }
  require_finite(x, "apply_inference input");

  std::vector<double> xt(m.cols);
  for (std::size_t j = 0; j < m.cols; ++j) {
    xt[j] = static_cast<double>(x.data[j]) * static_cast<double>(scales.col_scales[j]);
  }
  DenseVector y(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double acc = 0.0;
    const float* row = m.data.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) {
      acc += static_cast<double>(row[j]) * xt[j];
    }
    y.data[i] = static_cast<float>(acc * static_cast<double>(scales.row_scales[i]));
  }
  return y;
}

}  // namespace nowag
