#pragma once

// Little-endian wire helpers shared by the tensor container and the two
// archive formats. Byte order is assembled explicitly so the formats are
// defined independently of host endianness.

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "nowag/types.hpp"

namespace nowag::io {

class ByteWriter {
 public:
  void put_u8(std::uint8_t v) { buf_.push_back(v); }
  void put_u16(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v & 0xff));
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void put_u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) buf_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void put_u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) buf_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(const std::uint8_t* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }

  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size, std::string what)
      : data_(data), size_(size), what_(std::move(what)) {}

  std::uint8_t get_u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint16_t get_u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(data_[pos_]) |
                      static_cast<std::uint16_t>(data_[pos_ + 1]) << 8;
    pos_ += 2;
    return v;
  }
  std::uint32_t get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t get_u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float get_f32() { return std::bit_cast<float>(get_u32()); }
  double get_f64() { return std::bit_cast<double>(get_u64()); }

  const std::uint8_t* get_bytes(std::size_t n) {
    need(n);
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }

  std::size_t remaining() const { return size_ - pos_; }

  // Verifies the declared payload consumed the file exactly.
  void expect_eof() const {
    if (pos_ != size_) {
      throw ValidationError(what_ + ": " + std::to_string(size_ - pos_) +
                            " trailing byte(s) after declared payload");
    }
  }

  void need(std::size_t n) const {
    if (size_ - pos_ < n) {
      throw ValidationError(what_ + ": truncated, need " + std::to_string(n) +
                            " more byte(s) at offset " + std::to_string(pos_) +
                            " but only " + std::to_string(size_ - pos_) + " remain");
    }
  }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string what_;
};

// Packs fixed-width integers LSB-first into little-endian bytes. The final
// partial byte is zero-padded, which keeps encodings canonical.
class BitWriter {
 public:
  explicit BitWriter(ByteWriter& out) : out_(out) {}

  void push(std::uint32_t value, unsigned width) {
    acc_ |= static_cast<std::uint64_t>(value) << nbits_;
    nbits_ += width;
    while (nbits_ >= 8) {
      out_.put_u8(static_cast<std::uint8_t>(acc_ & 0xff));
      acc_ >>= 8;
      nbits_ -= 8;
    }
  }

  void finish() {
    if (nbits_ > 0) {
      out_.put_u8(static_cast<std::uint8_t>(acc_ & 0xff));
      acc_ = 0;
      nbits_ = 0;
    }
  }

 private:
  ByteWriter& out_;
  std::uint64_t acc_ = 0;
  unsigned nbits_ = 0;
};

class BitReader {
 public:
  BitReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint32_t read(unsigned width) {
    while (nbits_ < width) {
      if (byte_ >= size_) {
        throw ValidationError("bit stream: exhausted before reading all fields");
      }
      acc_ |= static_cast<std::uint64_t>(data_[byte_++]) << nbits_;
      nbits_ += 8;
    }
    std::uint32_t v = width == 0 ? 0u
                                 : static_cast<std::uint32_t>(acc_ & ((1ull << width) - 1));
    acc_ >>= width;
    nbits_ -= width;
    return v;
  }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t byte_ = 0;
  std::uint64_t acc_ = 0;
  unsigned nbits_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

// rows*cols with an overflow check, so hostile headers cannot wrap the
// payload-size arithmetic.
std::size_t checked_mul(std::uint64_t a, std::uint64_t b, const std::string& what);

}  // namespace nowag::io
