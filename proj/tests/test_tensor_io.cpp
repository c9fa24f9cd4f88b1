#include "doctest.h"

#include <cstring>
#include <limits>

#include "nowag/binary_io.hpp"
#include "nowag/tensor_io.hpp"
#include "test_util.hpp"

using namespace nowag;

TEST_CASE("matrix bytes round-trip is bit-exact") {
  DenseMatrix m = testutil::random_matrix(7, 5, 42, -10.0f, 10.0f);
  std::vector<std::uint8_t> bytes = tensor_to_bytes(m);
  LoadedTensor t = tensor_from_bytes(bytes);
  REQUIRE(std::holds_alternative<DenseMatrix>(t));
  const DenseMatrix& back = std::get<DenseMatrix>(t);
  CHECK(back.rows == 7);
  CHECK(back.cols == 5);
  CHECK(tensor_to_bytes(back) == bytes);
}

TEST_CASE("vector bytes round-trip is bit-exact") {
  DenseVector v = testutil::random_vector(13, 7);
  std::vector<std::uint8_t> bytes = tensor_to_bytes(v);
  LoadedTensor t = tensor_from_bytes(bytes);
  REQUIRE(std::holds_alternative<DenseVector>(t));
  CHECK(tensor_to_bytes(std::get<DenseVector>(t)) == bytes);
}

TEST_CASE("header layout: magic, version, dtype, ndim, little-endian dims") {
  DenseMatrix m(3, 258);
  std::vector<std::uint8_t> b = tensor_to_bytes(m);
  CHECK(b[0] == 'N');
  CHECK(b[1] == 'W');
  CHECK(b[2] == 'T');
  CHECK(b[3] == 'F');
  CHECK(b[4] == 1);  // version, low byte first
  CHECK(b[5] == 0);
  CHECK(b[6] == 0);  // dtype binary32
  CHECK(b[7] == 2);  // ndim
  CHECK(b[8] == 3);  // rows = 3
  CHECK(b[16] == 2);  // cols = 258 = 0x102
  CHECK(b[17] == 1);
  CHECK(b.size() == 8 + 16 + 3 * 258 * 4);
}

TEST_CASE("file round-trip through save_tensor/load_matrix") {
  testutil::TempDir tmp;
  DenseMatrix m = testutil::random_matrix(9, 4, 3);
  save_tensor(tmp.file("m.nwtf"), m);
  DenseMatrix back = load_matrix(tmp.file("m.nwtf"));
  CHECK(back.rows == m.rows);
  CHECK(back.cols == m.cols);
  CHECK(std::memcmp(back.data.data(), m.data.data(), m.data.size() * sizeof(float)) == 0);

  DenseVector v = testutil::random_vector(6, 4);
  save_tensor(tmp.file("v.nwtf"), v);
  DenseVector vback = load_vector(tmp.file("v.nwtf"));
  CHECK(vback.len == 6);
  CHECK(std::memcmp(vback.data.data(), v.data.data(), 6 * sizeof(float)) == 0);
}

TEST_CASE("rank mismatch and missing files are rejected") {
  testutil::TempDir tmp;
  save_tensor(tmp.file("m.nwtf"), DenseMatrix(2, 2));
  save_tensor(tmp.file("v.nwtf"), DenseVector(4));
  CHECK_THROWS_AS(load_vector(tmp.file("m.nwtf")), ValidationError);
  CHECK_THROWS_AS(load_matrix(tmp.file("v.nwtf")), ValidationError);
  CHECK_THROWS_AS(load_matrix(tmp.file("absent.nwtf")), ValidationError);
}

TEST_CASE("corrupted headers are rejected") {
  DenseMatrix m = testutil::random_matrix(2, 3, 5);
  std::vector<std::uint8_t> good = tensor_to_bytes(m);

  SUBCASE("bad magic") {
    auto b = good;
    b[0] = 'X';
    CHECK_THROWS_WITH_AS(tensor_from_bytes(b), doctest::Contains("magic"), ValidationError);
  }
  SUBCASE("unknown version") {
    auto b = good;
    b[4] = 2;
    CHECK_THROWS_WITH_AS(tensor_from_bytes(b), doctest::Contains("version"), ValidationError);
  }
  SUBCASE("unknown dtype") {
    auto b = good;
    b[6] = 1;
    CHECK_THROWS_AS(tensor_from_bytes(b), ValidationError);
  }
  SUBCASE("bad ndim") {
    auto b = good;
    b[7] = 3;
    CHECK_THROWS_AS(tensor_from_bytes(b), ValidationError);
    b[7] = 0;
    CHECK_THROWS_AS(tensor_from_bytes(b), ValidationError);
  }
  SUBCASE("truncated payload") {
    auto b = good;
    b.pop_back();
    CHECK_THROWS_WITH_AS(tensor_from_bytes(b), doctest::Contains("truncated"), ValidationError);
  }
  SUBCASE("trailing bytes") {
    auto b = good;
    b.push_back(0);
    CHECK_THROWS_WITH_AS(tensor_from_bytes(b), doctest::Contains("trailing"), ValidationError);
  }
}

TEST_CASE("dimension products that overflow are rejected") {
  io::ByteWriter w;
  w.put_bytes(reinterpret_cast<const std::uint8_t*>("NWTF"), 4);
  w.put_u16(1);
  w.put_u8(0);
  w.put_u8(2);
  w.put_u64(std::uint64_t{1} << 33);
  w.put_u64(std::uint64_t{1} << 33);
  CHECK_THROWS_AS(tensor_from_bytes(w.bytes()), ValidationError);
}

TEST_CASE("non-finite payloads are rejected in both directions") {
  DenseMatrix m(2, 2);
  m.data[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_WITH_AS(tensor_to_bytes(m), doctest::Contains("3"), ValidationError);

  DenseMatrix ok(2, 2);
  std::vector<std::uint8_t> b = tensor_to_bytes(ok);
  // Patch one payload float to +inf (0x7f800000, little-endian).
  std::size_t off = b.size() - 4;
  b[off + 0] = 0x00;
  b[off + 1] = 0x00;
  b[off + 2] = 0x80;
  b[off + 3] = 0x7f;
  CHECK_THROWS_AS(tensor_from_bytes(b), ValidationError);
}

TEST_CASE("single-element tensors survive") {
  DenseMatrix m(1, 1, {2.5f});
  auto b = tensor_to_bytes(m);
  CHECK(std::get<DenseMatrix>(tensor_from_bytes(b)).data[0] == 2.5f);
}
