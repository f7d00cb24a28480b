#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "topotrace/geometry.hpp"

namespace topotrace {

/// Dense row-major 2-D array with bounds-aware accessors.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw std::invalid_argument("negative grid dimensions");
    values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool contains(Pixel p) const { return contains(p.x, p.y); }

  T& operator()(int x, int y) { return values_[index(x, y)]; }
  const T& operator()(int x, int y) const { return values_[index(x, y)]; }
  T& operator[](Pixel p) { return values_[index(p.x, p.y)]; }
  const T& operator[](Pixel p) const { return values_[index(p.x, p.y)]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  bool same_shape(const Grid& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> values_;
};

/// Binary one-pixel-wide skeleton; 0 = background, 1 = skeleton.
struct SkeletonRaster : Grid<std::uint8_t> {
  using Grid::Grid;

  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : values()) n += v != 0;
    return n;
  }
};

/// Per-pixel score of a global segmentation model, values in [0, 1].
struct ConfidenceMap : Grid<double> {
  using Grid::Grid;
};

/// Square patch-level heatmap, values in [0, 1].
struct Heatmap : Grid<double> {
  Heatmap() = default;
  explicit Heatmap(int side, double fill = 0.0) : Grid(side, side, fill) {}

  int side() const { return width(); }
};

}  // namespace topotrace
