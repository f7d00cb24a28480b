#include "topotrace/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "topotrace/errors.hpp"
#include "topotrace/io.hpp"

namespace topotrace {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view magic() {
    if (bytes_.size() < 2) throw ParseError("graymap: truncated header");
    pos_ = 2;
    return bytes_.substr(0, 2);
  }

  int number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      throw ParseError(std::string("graymap: expected ") + what + " at byte " + std::to_string(pos_));
    }
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1L << 30)) throw ParseError(std::string("graymap: ") + what + " too large");
    }
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw ParseError("graymap: missing whitespace after header");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string header(const char* magic, int width, int height, int maxval) {
  return std::string(magic) + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n" +
         std::to_string(maxval) + "\n";
}

}  // namespace

GrayImage parse_pgm(std::string_view bytes) {
  HeaderReader reader(bytes);
  if (reader.magic() != "P5") throw ParseError("graymap: not a binary PGM (P5)");
  GrayImage image;
  image.width = reader.number("width");
  image.height = reader.number("height");
  image.maxval = reader.number("maxval");
  if (image.width <= 0 || image.height <= 0) throw ParseError("graymap: empty image");
  if (image.maxval <= 0 || image.maxval > 65535) throw ParseError("graymap: maxval out of range");
  const std::size_t start = reader.raster_start();
  const std::size_t bytes_per_sample = image.maxval > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height);
  if (bytes.size() < start + count * bytes_per_sample) throw ParseError("graymap: truncated raster");
  image.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + start + i * bytes_per_sample);
    const int v = bytes_per_sample == 2 ? (p[0] << 8) | p[1] : p[0];
    if (v > image.maxval) throw ParseError("graymap: sample exceeds maxval at index " + std::to_string(i));
    image.samples[i] = static_cast<std::uint16_t>(v);
  }
  return image;
}

std::string encode_pgm(const GrayImage& image) {
  std::string out = header("P5", image.width, image.height, image.maxval);
  const bool wide = image.maxval > 255;
  out.reserve(out.size() + image.samples.size() * (wide ? 2 : 1));
  for (std::uint16_t v : image.samples) {
    if (wide) out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  try {
    return parse_pgm(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  write_file_atomic(path, encode_pgm(image));
}

SkeletonRaster raster_from_pgm(const GrayImage& image) {
  SkeletonRaster raster(image.width, image.height);
  auto out = raster.values();
  for (std::size_t i = 0; i < image.samples.size(); ++i) out[i] = image.samples[i] != 0;
  return raster;
}

GrayImage raster_to_pgm(const SkeletonRaster& raster) {
  GrayImage image{raster.width(), raster.height(), 255, {}};
  image.samples.reserve(raster.size());
  for (auto v : raster.values()) image.samples.push_back(v ? 255 : 0);
  return image;
}

SkeletonRaster load_raster(const std::filesystem::path& path) { return raster_from_pgm(read_pgm(path)); }

void save_raster(const std::filesystem::path& path, const SkeletonRaster& raster) {
  write_pgm(path, raster_to_pgm(raster));
}

ConfidenceMap confidence_from_pgm(const GrayImage& image) {
  ConfidenceMap conf(image.width, image.height);
  auto out = conf.values();
  const double scale = 1.0 / image.maxval;
  for (std::size_t i = 0; i < image.samples.size(); ++i) out[i] = image.samples[i] * scale;
  return conf;
}

GrayImage confidence_to_pgm(const ConfidenceMap& conf, int maxval) {
  if (maxval != 255 && maxval != 65535) throw Error("confidence maps are written with maxval 255 or 65535");
  GrayImage image{conf.width(), conf.height(), maxval, {}};
  image.samples.reserve(conf.size());
  for (double v : conf.values()) {
    image.samples.push_back(static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * maxval)));
  }
  return image;
}

ConfidenceMap load_confidence(const std::filesystem::path& path) { return confidence_from_pgm(read_pgm(path)); }

void save_confidence(const std::filesystem::path& path, const ConfidenceMap& conf, int maxval) {
  write_pgm(path, confidence_to_pgm(conf, maxval));
}

Heatmap heatmap_from_pgm(const GrayImage& image) {
  if (image.width != image.height) {
    throw ParseError("heatmap must be square, got " + std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  Heatmap h(image.width);
  auto out = h.values();
  const double scale = 1.0 / image.maxval;
  for (std::size_t i = 0; i < image.samples.size(); ++i) out[i] = image.samples[i] * scale;
  return h;
}

GrayImage heatmap_to_pgm(const Heatmap& heatmap) {
  GrayImage image{heatmap.side(), heatmap.side(), 65535, {}};
  image.samples.reserve(heatmap.size());
  for (double v : heatmap.values()) {
    image.samples.push_back(static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0)));
  }
  return image;
}

Heatmap quantize_heatmap(Heatmap heatmap) {
  const double scale = 1.0 / 65535;
  for (double& v : heatmap.values()) v = static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0)) * scale;
  return heatmap;
}

Heatmap load_heatmap(const std::filesystem::path& path) { return heatmap_from_pgm(read_pgm(path)); }

void save_heatmap(const std::filesystem::path& path, const Heatmap& heatmap) {
  write_pgm(path, heatmap_to_pgm(heatmap));
}

std::string encode_ppm(int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
    throw Error("pixmap buffer does not match its dimensions");
  }
  std::string out = header("P6", width, height, 255);
  out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
  return out;
}

}  // namespace topotrace
