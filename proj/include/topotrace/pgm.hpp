#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "topotrace/grid.hpp"

namespace topotrace {

/// Binary portable graymap (P5). Samples wider than 8 bits are big-endian.
struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> samples;
};

GrayImage parse_pgm(std::string_view bytes);
std::string encode_pgm(const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

// Skeleton rasters: maxval 255, 0 = background, 255 = skeleton. Any non-zero
// sample loads as a skeleton pixel.
SkeletonRaster raster_from_pgm(const GrayImage& image);
GrayImage raster_to_pgm(const SkeletonRaster& raster);
SkeletonRaster load_raster(const std::filesystem::path& path);
void save_raster(const std::filesystem::path& path, const SkeletonRaster& raster);

// Confidence maps: maxval 255 or 65535, normalized to [0, 1] on load.
ConfidenceMap confidence_from_pgm(const GrayImage& image);
GrayImage confidence_to_pgm(const ConfidenceMap& conf, int maxval = 255);
ConfidenceMap load_confidence(const std::filesystem::path& path);
void save_confidence(const std::filesystem::path& path, const ConfidenceMap& conf, int maxval = 255);

// Heatmaps: maxval 65535, sample = round(65535 * v).
/// Rounds every value to the nearest k / 65535, exactly as a save/load
/// round trip would, so quantized maps survive the file store bit for bit.
Heatmap quantize_heatmap(Heatmap heatmap);

Heatmap heatmap_from_pgm(const GrayImage& image);
GrayImage heatmap_to_pgm(const Heatmap& heatmap);
Heatmap load_heatmap(const std::filesystem::path& path);
void save_heatmap(const std::filesystem::path& path, const Heatmap& heatmap);

/// Binary portable pixmap (P6), 8-bit RGB triplets in row-major order.
std::string encode_ppm(int width, int height, const std::vector<std::uint8_t>& rgb);

}  // namespace topotrace
