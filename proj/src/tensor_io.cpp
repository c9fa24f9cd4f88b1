#include "nowag/tensor_io.hpp"

#include <cmath>
#include <cstring>

#include "nowag/binary_io.hpp"

namespace nowag {

namespace {

void put_header(io::ByteWriter& w, std::uint8_t ndim) {
  w.put_bytes(reinterpret_cast<const std::uint8_t*>(kTensorMagic), 4);
  w.put_u16(kTensorVersion);
  w.put_u8(kTensorDtypeF32);
  w.put_u8(ndim);
}

void put_payload(io::ByteWriter& w, const std::vector<float>& data, const std::string& what) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw ValidationError(what + ": non-finite value at flat index " + std::to_string(i));
    }
    w.put_f32(data[i]);
  }
}

std::vector<float> get_payload(io::ByteReader& r, std::size_t count, const std::string& what) {
  r.need(io::checked_mul(count, 4, what));
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = r.get_f32();
    if (!std::isfinite(data[i])) {
      throw ValidationError(what + ": non-finite payload value at flat index " +
                            std::to_string(i));
    }
  }
  return data;
}

}  // namespace

std::vector<std::uint8_t> tensor_to_bytes(const DenseMatrix& m) {
  io::ByteWriter w;
  put_header(w, 2);
  w.put_u64(m.rows);
  w.put_u64(m.cols);
  put_payload(w, m.data, "tensor save");
  return w.take();
}

std::vector<std::uint8_t> tensor_to_bytes(const DenseVector& v) {
  io::ByteWriter w;
  put_header(w, 1);
  w.put_u64(v.len);
  put_payload(w, v.data, "tensor save");
  return w.take();
}

LoadedTensor tensor_from_bytes(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  io::ByteReader r(bytes.data(), bytes.size(), what);
  const std::uint8_t* magic = r.get_bytes(4);
  if (std::memcmp(magic, kTensorMagic, 4) != 0) {
    throw ValidationError(what + ": bad magic, not a tensor file");
  }
  std::uint16_t version = r.get_u16();
  if (version != kTensorVersion) {
    throw ValidationError(what + ": unsupported version " + std::to_string(version));
  }
  std::uint8_t dtype = r.get_u8();
  if (dtype != kTensorDtypeF32) {
    throw ValidationError(what + ": unsupported dtype code " + std::to_string(dtype));
  }
  std::uint8_t ndim = r.get_u8();
  if (ndim == 1) {
    std::uint64_t len = r.get_u64();
    std::size_t n = io::checked_mul(len, 1, what);
    std::vector<float> data = get_payload(r, n, what);
    r.expect_eof();
    return DenseVector(n, std::move(data));
  }
  if (ndim == 2) {
    std::uint64_t rows = r.get_u64();
    std::uint64_t cols = r.get_u64();
    std::size_t n = io::checked_mul(rows, cols, what);
    std::vector<float> data = get_payload(r, n, what);
    r.expect_eof();
    return DenseMatrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
                       std::move(data));
  }
  throw ValidationError(what + ": unsupported ndim " + std::to_string(ndim) +
                        " (expected 1 or 2)");
}

void save_tensor(const std::string& path, const DenseMatrix& m) {
  io::write_file(path, tensor_to_bytes(m));
}

void save_tensor(const std::string& path, const DenseVector& v) {
  io::write_file(path, tensor_to_bytes(v));
}

LoadedTensor load_tensor(const std::string& path) {
  return tensor_from_bytes(io::read_file(path), path);
}

DenseMatrix load_matrix(const std::string& path) {
  LoadedTensor t = load_tensor(path);
  if (!std::holds_alternative<DenseMatrix>(t)) {
    throw ValidationError(path + ": expected a 2-D tensor");
  }
  return std::get<DenseMatrix>(std::move(t));
}

DenseVector load_vector(const std::string& path) {
  LoadedTensor t = load_tensor(path);
  if (!std::holds_alternative<DenseVector>(t)) {
    throw ValidationError(path + ": expected a 1-D tensor");
  }
  return std::get<DenseVector>(std::move(t));
}

}  // namespace nowag
