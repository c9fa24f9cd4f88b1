#include "nowag/types.hpp"

#include <cmath>

namespace nowag {

namespace {

void check_finite(const std::vector<float>& data, const std::string& what) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw ValidationError(what + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

}  // namespace

void require_finite(const DenseMatrix& m, const std::string& what) {
  check_finite(m.data, what);
}

void require_finite(const DenseVector& v, const std::string& what) {
  check_finite(v.data, what);
}

}  // namespace nowag
