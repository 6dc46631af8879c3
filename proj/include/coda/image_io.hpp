#pragma once

// File formats for label fields (binary PGM), probability fields and pixel
// feature images (CODAPMAP: "CODAPMAP", u32 H, u32 W, u32 K, then H*W*K
// little-endian float32 values, pixel-major).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coda/types.hpp"

namespace coda::io {

inline constexpr char kProbabilityMagic[8] = {'C', 'O', 'D', 'A',
                                              'P', 'M', 'A', 'P'};
inline constexpr std::size_t kProbabilityHeaderBytes = 20;

/// P5, maxval = K-1, one byte per pixel; a comment line records K.
std::string encode_pgm(const LabelMap& labels);
LabelMap decode_pgm(const std::string& bytes);

std::string encode_probability_map(const ProbabilityMap& map);
ProbabilityMap decode_probability_map(const std::string& bytes);

std::string encode_feature_image(const FeatureImage& image);
FeatureImage decode_feature_image(const std::string& bytes);

void write_pgm(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_pgm(const std::filesystem::path& path);

void write_probability_map(const std::filesystem::path& path,
                           const ProbabilityMap& map);
ProbabilityMap read_probability_map(const std::filesystem::path& path);

void write_feature_image(const std::filesystem::path& path,
                         const FeatureImage& image);
FeatureImage read_feature_image(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

// Little-endian scalar helpers shared by the checkpoint formats.
void append_u32(std::string& out, std::uint32_t v);
void append_u64(std::string& out, std::uint64_t v);
void append_f32(std::string& out, float v);
void append_f64(std::string& out, double v);

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string raw(std::size_t n);
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const;
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace coda::io
