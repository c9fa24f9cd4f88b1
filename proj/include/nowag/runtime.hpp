#pragma once

// Compressed archives and compressed-form inference.
//
// Two container formats, both little-endian, both validated exhaustively on
// load (a loader either errors or yields an archive satisfying every
// documented invariant):
//
// Quantized ("NWQZ"):
//   bytes 0-3  magic "NWQZ"
//   bytes 4-5  version, u16 (currently 1)
//   u64 rows, u64 cols, u64 padded_cols, u32 subvec_dim, u64 k
//   binary32 col_scales[cols], binary32 row_scales[rows]
//   binary32 codebook[k * subvec_dim], row-major
//   assignments: rows * padded_cols / subvec_dim indices, ceil(log2 k) bits
//   each, LSB-first within little-endian bytes, subvector scan order; the
//   final partial byte is zero-padded.
//
// Pruned ("NWSP"):
//   bytes 0-3  magic "NWSP"
//   bytes 4-5  version, u16 (currently 1)
//   u64 rows, u64 cols
//   u8 pattern tag: 0 = unstructured, 1 = semi-structured
//     tag 0: f64 sparsity
//     tag 1: u32 keep_n, u32 group_m
//   mask: rows * cols keep-bits, row-major, 8 per byte LSB-first, final
//   partial byte zero-padded
//   binary32 kept values in row-major scan order of the set bits
//
// Unused padding bits are ignored on load and written as zero, so a
// save-load-save cycle is byte-identical.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "nowag/pruner.hpp"
#include "nowag/types.hpp"
#include "nowag/vq.hpp"

namespace nowag {

inline constexpr char kQuantizedMagic[4] = {'N', 'W', 'Q', 'Z'};
inline constexpr char kPrunedMagic[4] = {'N', 'W', 'S', 'P'};
inline constexpr std::uint16_t kArchiveVersion = 1;

struct CompressedArchive {
  std::variant<QuantizedMatrix, PrunedMatrix> payload;
  std::uint16_t format_version = kArchiveVersion;

  bool is_quantized() const { return std::holds_alternative<QuantizedMatrix>(payload); }
  const QuantizedMatrix& quantized() const { return std::get<QuantizedMatrix>(payload); }
  const PrunedMatrix& pruned() const { return std::get<PrunedMatrix>(payload); }
  std::size_t rows() const;
  std::size_t cols() const;
};

// y = scales * decode(qm) * x computed directly on codebook rows; the dense
// matrix is never materialized. x is scaled by the column scales, extended
// with zeros across pad columns, accumulated per assigned centroid in
// double, and scaled by the row scales.
DenseVector matvec_quantized(const QuantizedMatrix& qm, const DenseVector& x);

// y = values * x skipping masked entries. Exactly matches the dense product
// since pruned slots hold zeros.
DenseVector matvec_pruned(const PrunedMatrix& pm, const DenseVector& x);

std::vector<std::uint8_t> archive_to_bytes(const CompressedArchive& a);
CompressedArchive archive_from_bytes(const std::vector<std::uint8_t>& bytes);

void save_archive(const std::string& path, const CompressedArchive& a);
CompressedArchive load_archive(const std::string& path);

// Compression figures against a 16-bit-per-value dense baseline.
// net counts everything the archive pays for (indices + codebook + scales,
// or kept values + mask/group-position bits); gross counts only the
// per-value encoding, matching the "weights only" convention. Scales,
// codebook entries, and kept values are counted at 16 bits.
struct CompressionRatio {
  double net = 0.0;
  double gross = 0.0;
};

CompressionRatio compression_ratio_breakdown(const CompressedArchive& a);

// The net figure (the conservative, everything-counted ratio).
double compression_ratio(const CompressedArchive& a);

void validate_archive(const CompressedArchive& a);

}  // namespace nowag
