#include "nowag/binary_io.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>

namespace nowag::io {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open " + path + ": " + std::strerror(errno));
  }
  in.seekg(0, std::ios::end);
  std::streampos size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw ValidationError("cannot read " + path);
  }
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ValidationError("cannot open " + path + " for writing: " + std::strerror(errno));
  }
  if (!bytes.empty()) {
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  out.flush();
  if (!out) {
    throw ValidationError("cannot write " + path);
  }
}

std::size_t checked_mul(std::uint64_t a, std::uint64_t b, const std::string& what) {
  if (a != 0 && b > UINT64_MAX / a) {
    throw ValidationError(what + ": size " + std::to_string(a) + " x " + std::to_string(b) +
                          " overflows");
  }
  std::uint64_t p = a * b;
  if (p > SIZE_MAX) {
    throw ValidationError(what + ": size does not fit addressable memory");
  }
  return static_cast<std::size_t>(p);
}

}  // namespace nowag::io
