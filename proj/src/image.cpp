#include "ciisod/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "ciisod/error.hpp"

namespace ciisod {

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Header {
  int width = 0;
  int height = 0;
  std::size_t payload = 0;  // offset of the first raster byte
};

class HeaderParser {
 public:
  HeaderParser(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  Header parse(const char* magic) {
    if (bytes_.size() < 2 || bytes_[0] != magic[0] || bytes_[1] != magic[1]) {
      fail(0, std::string("expected magic ") + magic);
    }
    pos_ = 2;
    Header h;
    h.width = number("width");
    h.height = number("height");
    const int maxval = number("maxval");
    if (maxval != 255) fail(pos_, "maxval " + std::to_string(maxval) + " is not 255");
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      fail(pos_, "missing whitespace after maxval");
    }
    h.payload = pos_ + 1;
    if (h.width < 1 || h.height < 1) fail(2, "empty image");
    return h;
  }

  [[noreturn]] void fail(std::size_t offset, const std::string& what) const {
    throw FormatError(path_.string() + ": " + what + " at byte offset " +
                      std::to_string(offset));
  }

 private:
  int number(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1 << 20) fail(start, std::string(field) + " out of range");
      ++pos_;
    }
    if (pos_ == start) fail(start, std::string("expected ") + field);
    return static_cast<int>(value);
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

void write_bytes(const std::filesystem::path& path, const std::string& header,
                 const std::vector<std::uint8_t>& raster) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << header;
  out.write(reinterpret_cast<const char*>(raster.data()),
            static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::uint8_t> raster_of(const std::vector<std::uint8_t>& bytes,
                                    const Header& h, std::size_t channels,
                                    const HeaderParser& parser) {
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height * channels;
  if (bytes.size() < h.payload + need) {
    parser.fail(bytes.size(), "truncated payload: expected " + std::to_string(need) +
                                  " raster bytes");
  }
  return {bytes.begin() + static_cast<std::ptrdiff_t>(h.payload),
          bytes.begin() + static_cast<std::ptrdiff_t>(h.payload + need)};
}

}  // namespace

std::uint8_t quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

RgbImage read_ppm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  HeaderParser parser(bytes, path);
  const Header h = parser.parse("P6");
  const auto raster = raster_of(bytes, h, 3, parser);
  RgbImage img(h.height, h.width);
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = raster[(static_cast<std::size_t>(y) * h.width + x) * 3 + c] / 255.0f;
      }
    }
  }
  return img;
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  std::vector<std::uint8_t> raster(3 * static_cast<std::size_t>(image.height) * image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        raster[(static_cast<std::size_t>(y) * image.width + x) * 3 + c] = quantize(image.at(c, y, x));
      }
    }
  }
  write_bytes(path, "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n",
              raster);
}

GrayMap read_pgm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  HeaderParser parser(bytes, path);
  const Header h = parser.parse("P5");
  const auto raster = raster_of(bytes, h, 1, parser);
  GrayMap map(h.height, h.width);
  for (std::size_t i = 0; i < raster.size(); ++i) map.values[i] = raster[i] / 255.0f;
  return map;
}

void write_pgm(const GrayMap& map, const std::filesystem::path& path) {
  std::vector<std::uint8_t> raster(map.values.size());
  std::transform(map.values.begin(), map.values.end(), raster.begin(), quantize);
  write_bytes(path, "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n",
              raster);
}

GrayMap read_mask(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  HeaderParser parser(bytes, path);
  const Header h = parser.parse("P5");
  const auto raster = raster_of(bytes, h, 1, parser);
  GrayMap map(h.height, h.width);
  for (std::size_t i = 0; i < raster.size(); ++i) map.values[i] = raster[i] >= 128 ? 1.0f : 0.0f;
  return map;
}

}  // namespace ciisod
