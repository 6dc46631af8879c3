#include <doctest.h>

#include <filesystem>
#include <random>

#include "coda/error.hpp"
#include "coda/image_io.hpp"

using namespace coda;

TEST_CASE("PGM round trip") {
  std::mt19937_64 rng(3);
  std::vector<std::int32_t> labels(7 * 5);
  for (auto& l : labels) l = static_cast<std::int32_t>(rng() % 5);
  const LabelMap map(7, 5, 5, labels);
  const auto bytes = io::encode_pgm(map);
  CHECK(bytes.rfind("P5", 0) == 0);
  CHECK(io::decode_pgm(bytes) == map);
}

TEST_CASE("PGM rejects malformed input") {
  CHECK_THROWS_AS(io::decode_pgm("P2\n1 1\n1\n0"), IoError);
  const LabelMap map(2, 2, 3, {0, 1, 2, 0});
  auto bytes = io::encode_pgm(map);
  bytes.pop_back();
  CHECK_THROWS_AS(io::decode_pgm(bytes), IoError);
}

TEST_CASE("probability map round trip at float precision") {
  const ProbabilityMap map(1, 2, 2, {0.25, 0.75, 0.5, 0.5});
  const auto bytes = io::encode_probability_map(map);
  CHECK(bytes.size() == io::kProbabilityHeaderBytes + 4 * 4);
  CHECK(bytes.substr(0, 8) == "CODAPMAP");
  const auto back = io::decode_probability_map(bytes);
  CHECK(back.height() == 1);
  CHECK(back.width() == 2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back.values()[i] == map.values()[i]);
  CHECK_THROWS_AS(io::decode_probability_map("NOTAMAP!" + bytes.substr(8)), IoError);
}

TEST_CASE("feature image round trip is exact for float-representable values") {
  FeatureImage img{2, 3, 5, {}};
  for (std::size_t i = 0; i < 30; ++i) {
    img.values.push_back(static_cast<double>(static_cast<float>(0.1 * i)));
  }
  CHECK(io::decode_feature_image(io::encode_feature_image(img)) == img);
}

TEST_CASE("file helpers") {
  const auto dir = std::filesystem::temp_directory_path() / "coda_io_test";
  std::filesystem::create_directories(dir);
  const LabelMap map(3, 3, 2, {0, 1, 0, 1, 1, 0, 0, 0, 1});
  io::write_pgm(dir / "a.pgm", map);
  CHECK(io::read_pgm(dir / "a.pgm") == map);
  CHECK_THROWS_AS(io::read_file(dir / "missing.bin"), IoError);
  CHECK_THROWS_AS(io::write_file("/proc/coda_cannot_write/x", "y"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("byte reader bounds") {
  std::string bytes;
  io::append_u32(bytes, 7);
  io::append_f64(bytes, 1.5);
  io::ByteReader reader(bytes);
  CHECK(reader.u32() == 7);
  CHECK(reader.f64() == 1.5);
  CHECK(reader.remaining() == 0);
  CHECK_THROWS_AS(reader.u32(), IoError);
}
