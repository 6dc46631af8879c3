#include "coda/image_io.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include "coda/error.hpp"

namespace coda::io {

void append_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void append_f32(std::string& out, float v) {
  append_u32(out, std::bit_cast<std::uint32_t>(v));
}

void append_f64(std::string& out, double v) {
  append_u64(out, std::bit_cast<std::uint64_t>(v));
}

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) throw IoError("unexpected end of data");
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++]))
         << (8 * b);
  }
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++]))
         << (8 * b);
  }
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::raw(std::size_t n) {
  need(n);
  auto s = bytes_.substr(pos_, n);
  pos_ += n;
  return s;
}

std::string encode_pgm(const LabelMap& labels) {
  if (labels.classes() < 2 || labels.classes() > 256) {
    throw IoError("PGM labels need 2 <= K <= 256");
  }
  std::ostringstream header;
  header << "P5\n# K=" << labels.classes() << "\n"
         << labels.width() << " " << labels.height() << "\n"
         << (labels.classes() - 1) << "\n";
  std::string out = header.str();
  out.reserve(out.size() + labels.pixels());
  for (auto label : labels.labels()) out.push_back(static_cast<char>(label));
  return out;
}

namespace {

// Reads the next whitespace-delimited header token, collecting "K=" comments.
std::string next_token(const std::string& bytes, std::size_t& pos,
                       std::size_t& comment_k) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      const auto end = bytes.find('\n', pos);
      const auto line = bytes.substr(pos + 1, end == std::string::npos ? std::string::npos : end - pos - 1);
      const auto k = line.find("K=");
      if (k != std::string::npos) comment_k = std::stoul(line.substr(k + 2));
      pos = end == std::string::npos ? bytes.size() : end + 1;
      continue;
    }
    break;
  }
  const auto start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw IoError("truncated PGM header");
  return bytes.substr(start, pos - start);
}

}  // namespace

LabelMap decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  std::size_t comment_k = 0;
  if (next_token(bytes, pos, comment_k) != "P5") throw IoError("not a P5 PGM");
  std::size_t width = 0, height = 0, maxval = 0;
  try {
    width = std::stoul(next_token(bytes, pos, comment_k));
    height = std::stoul(next_token(bytes, pos, comment_k));
    maxval = std::stoul(next_token(bytes, pos, comment_k));
  } catch (const std::invalid_argument&) {
    throw IoError("malformed PGM header");
  }
  if (maxval == 0 || maxval > 255) throw IoError("PGM maxval must be 1..255");
  ++pos;  // single whitespace before the raster
  if (bytes.size() < pos + width * height) throw IoError("truncated PGM raster");
  const std::size_t classes = comment_k ? comment_k : maxval + 1;
  std::vector<std::int32_t> labels(width * height);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    labels[p] = static_cast<unsigned char>(bytes[pos + p]);
  }
  return LabelMap(height, width, classes, std::move(labels));
}

namespace {

std::string encode_float_field(std::size_t height, std::size_t width,
                               std::size_t depth,
                               std::span<const double> values) {
  std::string out(kProbabilityMagic, 8);
  append_u32(out, static_cast<std::uint32_t>(height));
  append_u32(out, static_cast<std::uint32_t>(width));
  append_u32(out, static_cast<std::uint32_t>(depth));
  out.reserve(out.size() + values.size() * 4);
  for (double v : values) append_f32(out, static_cast<float>(v));
  return out;
}

struct FloatField {
  std::size_t height, width, depth;
  std::vector<double> values;
};

FloatField decode_float_field(const std::string& bytes) {
  ByteReader reader(bytes);
  if (reader.raw(8) != std::string(kProbabilityMagic, 8)) {
    throw IoError("bad CODAPMAP magic");
  }
  FloatField field{};
  field.height = reader.u32();
  field.width = reader.u32();
  field.depth = reader.u32();
  const std::size_t count = field.height * field.width * field.depth;
  if (reader.remaining() != count * 4) {
    throw IoError("CODAPMAP payload size mismatch");
  }
  field.values.resize(count);
  for (auto& v : field.values) v = reader.f32();
  return field;
}

}  // namespace

std::string encode_probability_map(const ProbabilityMap& map) {
  return encode_float_field(map.height(), map.width(), map.classes(),
                            map.values());
}

ProbabilityMap decode_probability_map(const std::string& bytes) {
  auto field = decode_float_field(bytes);
  return ProbabilityMap(field.height, field.width, field.depth,
                        std::move(field.values));
}

std::string encode_feature_image(const FeatureImage& image) {
  return encode_float_field(image.height, image.width, image.dim,
                            image.values);
}

FeatureImage decode_feature_image(const std::string& bytes) {
  auto field = decode_float_field(bytes);
  return FeatureImage{field.height, field.width, field.depth,
                      std::move(field.values)};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_pgm(const std::filesystem::path& path, const LabelMap& labels) {
  write_file(path, encode_pgm(labels));
}

LabelMap read_pgm(const std::filesystem::path& path) {
  return decode_pgm(read_file(path));
}

void write_probability_map(const std::filesystem::path& path,
                           const ProbabilityMap& map) {
  write_file(path, encode_probability_map(map));
}

ProbabilityMap read_probability_map(const std::filesystem::path& path) {
  return decode_probability_map(read_file(path));
}

void write_feature_image(const std::filesystem::path& path,
                         const FeatureImage& image) {
  write_file(path, encode_feature_image(image));
}

FeatureImage read_feature_image(const std::filesystem::path& path) {
  return decode_feature_image(read_file(path));
}

}  // namespace coda::io
