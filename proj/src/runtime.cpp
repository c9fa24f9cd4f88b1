#include "nowag/runtime.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "nowag/binary_io.hpp"

namespace nowag {

namespace {

unsigned index_width(std::uint64_t k) {
  return k <= 1 ? 0u : static_cast<unsigned>(std::bit_width(k - 1));
}

void put_scales(io::ByteWriter& w, const NormScales& s) {
  for (float v : s.col_scales) w.put_f32(v);
  for (float v : s.row_scales) w.put_f32(v);
}

NormScales get_scales(io::ByteReader& r, std::size_t rows, std::size_t cols,
                      const std::string& what) {
  // Check the declared payload against the bytes actually present before
  // sizing any buffer, so corrupt headers fail cleanly instead of tripping
  // a giant allocation.
  r.need(io::checked_mul(cols, 4, what));
  NormScales s;
  s.col_scales.resize(cols);
  // The construction epsilon is metadata, not stored; the vectors are
  // effective divisors and suffice for exact reconstruction.
  s.epsilon = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    s.col_scales[j] = r.get_f32();
    if (!(s.col_scales[j] > 0.0f) || !std::isfinite(s.col_scales[j])) {
      throw ValidationError(what + ": column scale " + std::to_string(j) +
                            " is not positive and finite");
    }
  }
  r.need(io::checked_mul(rows, 4, what));
  s.row_scales.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    s.row_scales[i] = r.get_f32();
    if (!(s.row_scales[i] > 0.0f) || !std::isfinite(s.row_scales[i])) {
      throw ValidationError(what + ": row scale " + std::to_string(i) +
                            " is not positive and finite");
    }
  }
  return s;
}

void put_quantized(io::ByteWriter& w, const QuantizedMatrix& qm) {
  validate_quantized(qm);
  w.put_bytes(reinterpret_cast<const std::uint8_t*>(kQuantizedMagic), 4);
  w.put_u16(kArchiveVersion);
  w.put_u64(qm.rows);
  w.put_u64(qm.cols);
  w.put_u64(qm.padded_cols);
  w.put_u32(static_cast<std::uint32_t>(qm.subvec_dim));
  w.put_u64(qm.codebook.k);
  put_scales(w, qm.scales);
  for (float c : qm.codebook.centroids) w.put_f32(c);
  io::BitWriter bits(w);
  unsigned width = index_width(qm.codebook.k);
  for (std::uint32_t a : qm.assignments.indices) bits.push(a, width);
  bits.finish();
}

QuantizedMatrix get_quantized(io::ByteReader& r, const std::string& what) {
  QuantizedMatrix qm;
  qm.rows = io::checked_mul(r.get_u64(), 1, what);
  qm.cols = io::checked_mul(r.get_u64(), 1, what);
  qm.padded_cols = io::checked_mul(r.get_u64(), 1, what);
  qm.subvec_dim = r.get_u32();
  std::uint64_t k = r.get_u64();

  if (qm.subvec_dim < 1) {
    throw ValidationError(what + ": subvector dim must be >= 1");
  }
  if (qm.padded_cols % qm.subvec_dim != 0) {
    throw ValidationError(what + ": padded cols not a multiple of subvector dim");
  }
  if (qm.padded_cols < qm.cols || qm.padded_cols - qm.cols >= qm.subvec_dim) {
    throw ValidationError(what + ": padded cols inconsistent with cols");
  }
  if (k < 1 || k > (std::uint64_t{1} << 26)) {
    throw ValidationError(what + ": codebook size " + std::to_string(k) + " out of range");
  }
  std::size_t n_sub =
      io::checked_mul(qm.rows, qm.padded_cols, what) / qm.subvec_dim;

  qm.scales = get_scales(r, qm.rows, qm.cols, what);

  std::size_t cb_len = io::checked_mul(k, qm.subvec_dim, what);
  r.need(io::checked_mul(cb_len, 4, what));
  qm.codebook.k = static_cast<std::size_t>(k);
  qm.codebook.dim = qm.subvec_dim;
  qm.codebook.centroids.resize(cb_len);
  for (std::size_t p = 0; p < cb_len; ++p) {
    qm.codebook.centroids[p] = r.get_f32();
    if (!std::isfinite(qm.codebook.centroids[p])) {
      throw ValidationError(what + ": non-finite codebook entry at flat index " +
                            std::to_string(p));
    }
  }

  unsigned width = index_width(k);
  std::size_t packed_bytes = (io::checked_mul(n_sub, width, what) + 7) / 8;
  const std::uint8_t* packed = r.get_bytes(packed_bytes);
  io::BitReader bits(packed, packed_bytes);
  qm.assignments.count = n_sub;
  qm.assignments.indices.resize(n_sub);
  for (std::size_t i = 0; i < n_sub; ++i) {
    std::uint32_t a = bits.read(width);
    if (a >= k) {
      throw ValidationError(what + ": assignment " + std::to_string(i) +
                            " references centroid " + std::to_string(a) +
                            " outside codebook of " + std::to_string(k));
    }
    qm.assignments.indices[i] = a;
  }
  r.expect_eof();
  validate_quantized(qm);
  return qm;
}

void put_pruned(io::ByteWriter& w, const PrunedMatrix& pm) {
  const PruneMask& mask = pm.mask;
  if (pm.values.rows != mask.rows || pm.values.cols != mask.cols ||
      mask.bits.size() != mask.rows * mask.cols) {
    throw ValidationError("pruned archive: mask and values shapes disagree");
  }
  require_finite(pm.values, "pruned archive values");
  w.put_bytes(reinterpret_cast<const std::uint8_t*>(kPrunedMagic), 4);
  w.put_u16(kArchiveVersion);
  w.put_u64(mask.rows);
  w.put_u64(mask.cols);
  w.put_u8(static_cast<std::uint8_t>(mask.pattern.kind));
  if (mask.pattern.kind == SparsityPattern::Kind::kUnstructured) {
    w.put_f64(mask.pattern.sparsity);
  } else {
    w.put_u32(mask.pattern.keep_n);
    w.put_u32(mask.pattern.group_m);
  }
  io::BitWriter bits(w);
  for (std::uint8_t b : mask.bits) bits.push(b ? 1u : 0u, 1);
  bits.finish();
  for (std::size_t p = 0; p < mask.bits.size(); ++p) {
    if (mask.bits[p]) w.put_f32(pm.values.data[p]);
  }
}

// Checks the mask honors its declared pattern: exact floor(s*total) zeros
// for unstructured, exactly keep_n set bits per aligned group for N:M.
void check_mask_pattern(const PruneMask& mask, const std::string& what) {
  if (mask.pattern.kind == SparsityPattern::Kind::kUnstructured) {
    double s = mask.pattern.sparsity;
    std::size_t expected =
        static_cast<std::size_t>(std::floor(s * static_cast<double>(mask.rows * mask.cols)));
    std::size_t zeros = mask.zero_count();
    if (zeros != expected) {
      throw ValidationError(what + ": mask has " + std::to_string(zeros) +
                            " zero bits but sparsity " + std::to_string(s) + " declares " +
                            std::to_string(expected));
    }
    return;
  }
  std::uint32_t n = mask.pattern.keep_n;
  std::uint32_t m = mask.pattern.group_m;
  if (mask.cols % m != 0) {
    throw ValidationError(what + ": cols not divisible by declared group width");
  }
  for (std::size_t i = 0; i < mask.rows; ++i) {
    for (std::size_t g = 0; g < mask.cols / m; ++g) {
      std::uint32_t kept = 0;
      for (std::uint32_t t = 0; t < m; ++t) kept += mask.bits[i * mask.cols + g * m + t];
      if (kept != n) {
        throw ValidationError(what + ": group (" + std::to_string(i) + "," + std::to_string(g) +
                              ") keeps " + std::to_string(kept) + " entries, pattern declares " +
                              std::to_string(n));
      }
    }
  }
}

PrunedMatrix get_pruned(io::ByteReader& r, const std::string& what) {
  std::size_t rows = io::checked_mul(r.get_u64(), 1, what);
  std::size_t cols = io::checked_mul(r.get_u64(), 1, what);
  std::size_t total = io::checked_mul(rows, cols, what);
  std::uint8_t tag = r.get_u8();

  PruneMask mask;
  mask.rows = rows;
  mask.cols = cols;
  if (tag == 0) {
    double s = r.get_f64();
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
      throw ValidationError(what + ": sparsity outside [0, 1]");
    }
    mask.pattern = SparsityPattern::unstructured(s);
  } else if (tag == 1) {
    std::uint32_t n = r.get_u32();
    std::uint32_t m = r.get_u32();
    if (n < 1 || n > m) {
      throw ValidationError(what + ": pattern requires 1 <= N <= M, got " + std::to_string(n) +
                            ":" + std::to_string(m));
    }
    mask.pattern = SparsityPattern::semi_structured(n, m);
  } else {
    throw ValidationError(what + ": unknown pattern tag " + std::to_string(tag));
  }

  std::size_t mask_bytes = (total + 7) / 8;
  const std::uint8_t* packed = r.get_bytes(mask_bytes);
  mask.bits.resize(total);
  for (std::size_t p = 0; p < total; ++p) {
    mask.bits[p] = (packed[p / 8] >> (p % 8)) & 1;  // padding bits ignored
  }
  check_mask_pattern(mask, what);

  PrunedMatrix pm;
  pm.values = DenseMatrix(rows, cols);
  for (std::size_t p = 0; p < total; ++p) {
    if (!mask.bits[p]) continue;
    float v = r.get_f32();
    if (!std::isfinite(v)) {
      throw ValidationError(what + ": non-finite kept value at flat index " + std::to_string(p));
    }
    pm.values.data[p] = v;
  }
  r.expect_eof();
  pm.mask = std::move(mask);
  return pm;
}

}  // namespace

std::size_t CompressedArchive::rows() const {
  return is_quantized() ? quantized().rows : pruned().values.rows;
}

std::size_t CompressedArchive::cols() const {
  return is_quantized() ? quantized().cols : pruned().values.cols;
}

DenseVector matvec_quantized(const QuantizedMatrix& qm, const DenseVector& x) {
  if (x.len != qm.cols) {
    throw ValidationError("matvec_quantized: input length " + std::to_string(x.len) +
                          " != matrix cols " + std::to_string(qm.cols));
  }
  require_finite(x, "matvec_quantized input");
  std::size_t d = qm.subvec_dim;
  std::size_t groups = qm.padded_cols / d;
  std::size_t k = qm.codebook.k;

  // Column-scaled input, zero-extended across the pad columns so pad
  // entries of any centroid contribute nothing.
  std::vector<double> xt(qm.padded_cols, 0.0);
  for (std::size_t j = 0; j < qm.cols; ++j) {
    xt[j] = static_cast<double>(x.data[j]) * static_cast<double>(qm.scales.col_scales[j]);
  }

  DenseVector y(qm.rows);
  for (std::size_t i = 0; i < qm.rows; ++i) {
    double acc = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
      std::uint32_t a = qm.assignments.indices[i * groups + g];
      if (a >= k) {
        throw ValidationError("matvec_quantized: corrupt assignment index");
      }
      const float* c = qm.codebook.centroids.data() + static_cast<std::size_t>(a) * d;
      const double* xg = xt.data() + g * d;
      for (std::size_t t = 0; t < d; ++t) {
        acc += static_cast<double>(c[t]) * xg[t];
      }
    }
    y.data[i] = static_cast<float>(acc * static_cast<double>(qm.scales.row_scales[i]));
  }
  return y;
}

DenseVector matvec_pruned(const PrunedMatrix& pm, const DenseVector& x) {
  if (x.len != pm.values.cols) {
    throw ValidationError("matvec_pruned: input length " + std::to_string(x.len) +
                          " != matrix cols " + std::to_string(pm.values.cols));
  }
  if (pm.mask.rows != pm.values.rows || pm.mask.cols != pm.values.cols) {
    throw ValidationError("matvec_pruned: mask and values shapes disagree");
  }
  require_finite(x, "matvec_pruned input");
  DenseVector y(pm.values.rows);
  for (std::size_t i = 0; i < pm.values.rows; ++i) {
    double acc = 0.0;
    const float* row = pm.values.data.data() + i * pm.values.cols;
    const std::uint8_t* keep = pm.mask.bits.data() + i * pm.values.cols;
    for (std::size_t j = 0; j < pm.values.cols; ++j) {
      if (keep[j]) acc += static_cast<double>(row[j]) * static_cast<double>(x.data[j]);
    }
    y.data[i] = static_cast<float>(acc);
  }
  return y;
}

std::vector<std::uint8_t> archive_to_bytes(const CompressedArchive& a) {
  if (a.format_version != kArchiveVersion) {
    throw ValidationError("archive: unsupported format version " +
                          std::to_string(a.format_version));
  }
  io::ByteWriter w;
  if (a.is_quantized()) {
    put_quantized(w, a.quantized());
  } else {
    put_pruned(w, a.pruned());
  }
  return w.take();
}

CompressedArchive archive_from_bytes(const std::vector<std::uint8_t>& bytes) {
  const std::string what = "archive";
  io::ByteReader r(bytes.data(), bytes.size(), what);
  const std::uint8_t* magic = r.get_bytes(4);
  bool quantized = std::memcmp(magic, kQuantizedMagic, 4) == 0;
  bool pruned = std::memcmp(magic, kPrunedMagic, 4) == 0;
  if (!quantized && !pruned) {
    throw ValidationError(what + ": bad magic, not a compressed archive");
  }
  std::uint16_t version = r.get_u16();
  if (version != kArchiveVersion) {
    throw ValidationError(what + ": unsupported version " + std::to_string(version));
  }
  CompressedArchive a;
  a.format_version = version;
  if (quantized) {
    a.payload = get_quantized(r, what);
  } else {
    a.payload = get_pruned(r, what);
  }
  return a;
}

void save_archive(const std::string& path, const CompressedArchive& a) {
  io::write_file(path, archive_to_bytes(a));
}

CompressedArchive load_archive(const std::string& path) {
  return archive_from_bytes(io::read_file(path));
}

CompressionRatio compression_ratio_breakdown(const CompressedArchive& a) {
  constexpr double kValueBits = 16.0;
  CompressionRatio r;
  if (a.is_quantized()) {
    const QuantizedMatrix& qm = a.quantized();
    BpvBreakdown b = bits_per_value_breakdown(qm.rows, qm.cols, qm.padded_cols, qm.subvec_dim,
                                              qm.codebook.k);
    r.net = kValueBits / b.total;
    r.gross = b.index_bits > 0.0 ? kValueBits / b.index_bits
                                 : std::numeric_limits<double>::infinity();
    return r;
  }
  const PrunedMatrix& pm = a.pruned();
  std::size_t total = pm.values.rows * pm.values.cols;
  if (total == 0) {
    throw ValidationError("compression_ratio: empty matrix has no accounting");
  }
  double kept = static_cast<double>(pm.mask.kept_count());
  double payload_bits;
  if (pm.mask.pattern.kind == SparsityPattern::Kind::kUnstructured) {
    // kept values at 16 bits plus one mask bit per entry
    payload_bits = kept * kValueBits + static_cast<double>(total);
  } else {
    // kept values at 16 bits plus a within-group position per kept value
    unsigned pos_bits = pm.mask.pattern.group_m <= 1
                            ? 0u
                            : static_cast<unsigned>(std::bit_width(
                                  std::uint64_t{pm.mask.pattern.group_m} - 1));
    payload_bits = kept * (kValueBits + pos_bits);
  }
  double dense_bits = static_cast<double>(total) * kValueBits;
  r.net = dense_bits / payload_bits;
  r.gross = kept > 0.0 ? dense_bits / (kept * kValueBits)
                       : std::numeric_limits<double>::infinity();
  return r;
}

double compression_ratio(const CompressedArchive& a) {
  return compression_ratio_breakdown(a).net;
}

void validate_archive(const CompressedArchive& a) {
  if (a.format_version != kArchiveVersion) {
    throw ValidationError("archive: unsupported format version");
  }
  if (a.is_quantized()) {
    validate_quantized(a.quantized());
    return;
  }
  const PrunedMatrix& pm = a.pruned();
  if (pm.values.rows != pm.mask.rows || pm.values.cols != pm.mask.cols ||
      pm.mask.bits.size() != pm.mask.rows * pm.mask.cols) {
    throw ValidationError("archive: mask and values shapes disagree");
  }
  require_finite(pm.values, "archive values");
  for (std::size_t p = 0; p < pm.mask.bits.size(); ++p) {
    if (!pm.mask.bits[p] && pm.values.data[p] != 0.0f) {
      throw ValidationError("archive: masked entry at flat index " + std::to_string(p) +
                            " is nonzero");
    }
  }
  check_mask_pattern(pm.mask, "archive");
}

}  // namespace nowag
