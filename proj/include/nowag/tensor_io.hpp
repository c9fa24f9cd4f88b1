#pragma once

// Flat binary container for dense tensors ("NWTF").
//
// Layout, all little-endian:
//   bytes 0-3   magic "NWTF"
//   bytes 4-5   format version, u16 (currently 1)
//   byte  6     dtype code, u8 (0 = binary32; the only code defined)
//   byte  7     ndim, u8 (1 or 2)
//   next        ndim x u64 dimension sizes
//   payload     prod(dims) binary32 values, row-major
//
// The loader consumes exactly the declared payload: truncation and trailing
// bytes are both hard errors, as are non-finite values in either direction.

#include <string>
#include <variant>
#include <vector>

#include "nowag/types.hpp"

namespace nowag {

inline constexpr char kTensorMagic[4] = {'N', 'W', 'T', 'F'};
inline constexpr std::uint16_t kTensorVersion = 1;
inline constexpr std::uint8_t kTensorDtypeF32 = 0;

using LoadedTensor = std::variant<DenseVector, DenseMatrix>;

std::vector<std::uint8_t> tensor_to_bytes(const DenseMatrix& m);
std::vector<std::uint8_t> tensor_to_bytes(const DenseVector& v);
LoadedTensor tensor_from_bytes(const std::vector<std::uint8_t>& bytes,
                               const std::string& what = "tensor");

void save_tensor(const std::string& path, const DenseMatrix& m);
void save_tensor(const std::string& path, const DenseVector& v);
LoadedTensor load_tensor(const std::string& path);

// Convenience wrappers that reject the other rank.
DenseMatrix load_matrix(const std::string& path);
DenseVector load_vector(const std::string& path);

}  // namespace nowag
