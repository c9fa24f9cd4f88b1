#include "nowag/scoring.hpp"

#include <algorithm>
#include <cmath>

namespace nowag {

namespace {

void check_dims(const DenseMatrix& m, const HessianDiagonal& h, const char* op) {
  if (h.dim != m.cols) {
    throw ValidationError(std::string(op) + ": hessian dim " + std::to_string(h.dim) +
                          " != matrix cols " + std::to_string(m.cols));
  }
}

}  // namespace

ScoreMatrix nowag_scores(const DenseMatrix& normalized, const HessianDiagonal& h) {
  validate_hessian_diag(h, normalized.cols);
  ScoreMatrix s(normalized.rows, normalized.cols);
  for (std::size_t i = 0; i < normalized.rows; ++i) {
    for (std::size_t j = 0; j < normalized.cols; ++j) {
      double v = normalized.at(i, j);
      s.at(i, j) = v * v * h.weights[j];
    }
  }
  return s;
}

ScoreMatrix wanda_scores(const DenseMatrix& w, const HessianDiagonal& h) {
  validate_hessian_diag(h, w.cols);
  ScoreMatrix s(w.rows, w.cols);
  for (std::size_t j = 0; j < w.cols; ++j) {
    double root = std::sqrt(h.weights[j]);
    for (std::size_t i = 0; i < w.rows; ++i) {
      s.at(i, j) = std::fabs(static_cast<double>(w.at(i, j))) * root;
    }
  }
  return s;
}

double proxy_loss_diag(const DenseMatrix& a, const DenseMatrix& b, const HessianDiagonal& h) {
  if (!a.same_shape(b)) {
    throw ValidationError("proxy_loss_diag: shape mismatch");
  }
  check_dims(a, h, "proxy_loss_diag");
  double loss = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) {
      double d = static_cast<double>(a.at(i, j)) - static_cast<double>(b.at(i, j));
      loss += d * d * h.weights[j];
    }
  }
  return loss;
}

double proxy_loss_full(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& h) {
  if (!a.same_shape(b)) {
    throw ValidationError("proxy_loss_full: shape mismatch");
  }
  if (h.rows != h.cols || h.rows != a.cols) {
    throw ValidationError("proxy_loss_full: hessian must be cols x cols");
  }
  double max_abs = 0.0;
  for (std::size_t i = 0; i < h.data.size(); ++i) {
    max_abs = std::max(max_abs, std::fabs(static_cast<double>(h.data[i])));
  }
  double tol = 1e-6 * std::max(1.0, max_abs);
  for (std::size_t j = 0; j < h.rows; ++j) {
    for (std::size_t k = j + 1; k < h.cols; ++k) {
      if (std::fabs(static_cast<double>(h.at(j, k)) - static_cast<double>(h.at(k, j))) > tol) {
        throw ValidationError("proxy_loss_full: hessian asymmetric at (" + std::to_string(j) +
                              "," + std::to_string(k) + ") beyond tolerance");
      }
    }
  }

  std::size_t d = a.cols;
  std::vector<double> diff(d);
  double loss = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      diff[j] = static_cast<double>(a.at(i, j)) - static_cast<double>(b.at(i, j));
    }
    for (std::size_t j = 0; j < d; ++j) {
      double hj = 0.0;
      const float* hrow = h.data.data() + j * d;
      for (std::size_t k = 0; k < d; ++k) {
        hj += static_cast<double>(hrow[k]) * diff[k];
      }
      loss += diff[j] * hj;
    }
  }
  return loss;
}

}  // namespace nowag
