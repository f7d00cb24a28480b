#include "topotrace/patchgt.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "topotrace/errors.hpp"

namespace topotrace {

std::string_view to_string(GtMode mode) {
  switch (mode) {
    case GtMode::non_connectivity: return "non-connectivity";
    case GtMode::connectivity: return "connectivity";
    case GtMode::connectivity_av: return "connectivity-av";
  }
  return "connectivity";
}

std::optional<GtMode> parse_gt_mode(std::string_view text) {
  if (text == "non-connectivity" || text == "non_connectivity") return GtMode::non_connectivity;
  if (text == "connectivity") return GtMode::connectivity;
  if (text == "connectivity-av" || text == "connectivity_av") return GtMode::connectivity_av;
  return std::nullopt;
}

void require_vessel_labels(const NetworkGraph& graph) {
  for (std::size_t i = 0; i < graph.edges().size(); ++i) {
    const ClassLabel label = graph.edges()[i].label;
    if (label != ClassLabel::artery && label != ClassLabel::vein) {
      throw InvariantError("connectivity-av requires artery/vein labels; edge " + std::to_string(i) + " is " +
                           std::string(to_string(label)));
    }
  }
}

GtQuery query_gt(const NetworkGraph& graph, const PatchWindow& window, GtMode mode) {
  if (mode == GtMode::connectivity_av) require_vessel_labels(graph);
  const ClippedSubgraph clipped = clip_to_window(graph, window);
  GtQuery out;
  if (clipped.center) out.center_label = clipped.pieces[clipped.center->piece].label;
  if (mode == GtMode::non_connectivity) {
    out.points = clipped.border_points;
    return out;
  }
  const bool same_class = mode == GtMode::connectivity_av;
  for (const auto& bp : clipped.border_points) {
    if (connected_in_patch(clipped, bp, same_class) == CenterConnectivity::connected) out.points.push_back(bp);
  }
  return out;
}

std::vector<BorderPoint> gt_points(const NetworkGraph& graph, const PatchWindow& window, GtMode mode) {
  return query_gt(graph, window, mode).points;
}

std::vector<Point> to_patch_coordinates(std::span<const BorderPoint> points, const PatchWindow& window) {
  const Pixel o = window.origin();
  std::vector<Point> out;
  out.reserve(points.size());
  for (const auto& bp : points) out.push_back({bp.pos.x - o.x, bp.pos.y - o.y});
  return out;
}

Heatmap make_gt_heatmap(std::span<const Point> points, int patch_size, double sigma) {
  if (!(sigma > 0.0)) throw InvariantError("heatmap sigma must be positive");
  if (patch_size <= 0) throw InvariantError("patch size must be positive");
  for (const auto& p : points) {
    if (!(p.x >= 0 && p.y >= 0 && p.x <= patch_size - 1 && p.y <= patch_size - 1)) {
      throw InvariantError("heatmap peak outside the patch");
    }
  }
  // Canonical summation order makes the result independent of input order.
  std::vector<Point> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](Point a, Point b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });

  Heatmap h(patch_size);
  if (sorted.empty()) return h;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = 0; y < patch_size; ++y) {
    for (int x = 0; x < patch_size; ++x) {
      double sum = 0.0;
      for (const auto& p : sorted) {
        const double dx = x - p.x;
        const double dy = y - p.y;
        sum += std::exp(-(dx * dx + dy * dy) * inv);
      }
      h(x, y) = std::min(sum, 1.0);
    }
  }
  return h;
}

std::vector<PatchWindow> sample_training_patches(const NetworkGraph& graph, std::size_t n, int patch_size,
                                                 std::uint64_t rng_seed, std::optional<int> square_side) {
  const int side = square_side.value_or(default_square_side(patch_size));
  std::vector<PatchWindow> eligible;
  for (const auto& v : graph.vertices()) {
    PatchWindow w = PatchWindow::centered(to_pixel(v.pos), patch_size, side);
    if (w.fits(graph.width(), graph.height())) eligible.push_back(w);
  }
  if (eligible.empty()) throw InvariantError("no vertex has a patch window that fits inside the image");
  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  std::vector<PatchWindow> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(eligible[pick(rng)]);
  return out;
}

}  // namespace topotrace
