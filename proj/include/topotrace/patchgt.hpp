#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "topotrace/grid.hpp"
#include "topotrace/netgraph.hpp"

namespace topotrace {

/// Which border intersections become ground-truth peaks.
enum class GtMode {
  non_connectivity,  // every intersection
  connectivity,      // intersections reachable from the center inside the square
  connectivity_av,   // reachable through edges of the center's vessel class only
};

std::string_view to_string(GtMode mode);
std::optional<GtMode> parse_gt_mode(std::string_view text);

inline constexpr double kDefaultSigma = 2.0;

inline int default_square_side(int patch_size) { return patch_size - 6; }

struct GtQuery {
  std::vector<BorderPoint> points;
  std::optional<ClassLabel> center_label;  // label of the edge the center snapped to
};

/// Ground-truth border points plus the class the center lies on. A center
/// that is off the network yields no points in the connectivity modes.
GtQuery query_gt(const NetworkGraph& graph, const PatchWindow& window, GtMode mode);

std::vector<BorderPoint> gt_points(const NetworkGraph& graph, const PatchWindow& window, GtMode mode);

/// Throws InvariantError unless every edge is labeled artery or vein.
void require_vessel_labels(const NetworkGraph& graph);

/// Converts border points to patch-local coordinates (origin at the
/// window's top-left patch pixel).
std::vector<Point> to_patch_coordinates(std::span<const BorderPoint> points, const PatchWindow& window);

/// Sum of unit Gaussians centered on `points` (patch-local), clamped to 1.
Heatmap make_gt_heatmap(std::span<const Point> points, int patch_size, double sigma = kDefaultSigma);

/// Windows centered on uniformly drawn eligible vertices, with replacement.
/// A vertex is eligible when its unshifted window fits inside the image.
std::vector<PatchWindow> sample_training_patches(const NetworkGraph& graph, std::size_t n, int patch_size,
                                                 std::uint64_t rng_seed, std::optional<int> square_side = std::nullopt);

}  // namespace topotrace
