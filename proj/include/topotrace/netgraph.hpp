#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "topotrace/geometry.hpp"
#include "topotrace/grid.hpp"

namespace topotrace {

enum class ClassLabel { unlabeled, artery, vein, road };

std::string_view to_string(ClassLabel label);
std::optional<ClassLabel> parse_label(std::string_view text);

struct Vertex {
  int id = 0;
  Point pos;

  friend bool operator==(const Vertex&, const Vertex&) = default;
};

struct Edge {
  int u = 0;
  int v = 0;
  ClassLabel label = ClassLabel::unlabeled;
  std::vector<Point> points;  // first == pos(u), last == pos(v)

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Vertices plus polyline edges; the representation of both annotated and
/// traced networks. Every mutation re-checks the data-model invariants and
/// throws InvariantError naming the offending element.
class NetworkGraph {
 public:
  NetworkGraph() = default;
  NetworkGraph(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }

  bool has_vertex(int id) const { return index_.contains(id); }
  const Vertex& vertex(int id) const;

  /// Adds a vertex with the next free id (one past the largest id so far).
  int add_vertex(Point pos);
  void add_vertex(int id, Point pos);

  /// An empty `points` list means the straight segment pos(u) -> pos(v).
  std::size_t add_edge(int u, int v, std::vector<Point> points, ClassLabel label = ClassLabel::unlabeled);

  std::vector<int> degrees() const;  // indexed like vertices()
  bool in_bounds(Point p) const { return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_; }

  friend bool operator==(const NetworkGraph&, const NetworkGraph&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int next_id_ = 0;
  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::unordered_map<int, std::size_t> index_;
  bool has_road_ = false;
  bool has_vessel_ = false;
};

NetworkGraph parse_graph(std::string_view json_text);
std::string serialize_graph(const NetworkGraph& graph);
NetworkGraph load_graph(const std::filesystem::path& path);
void save_graph(const std::filesystem::path& path, const NetworkGraph& graph);

/// 8-connected digital segment between two pixels (integer midpoint
/// algorithm). The pixel set does not depend on the argument order.
std::vector<Pixel> digital_line(Pixel a, Pixel b);

/// Draws every polyline segment as a one-pixel-wide 8-connected line.
/// When `class_filter` is set only edges with that label are drawn.
SkeletonRaster rasterize(const NetworkGraph& graph, std::optional<ClassLabel> class_filter = std::nullopt);
void draw_polyline(SkeletonRaster& raster, const std::vector<Point>& points);

// ---------------------------------------------------------------------------
// Patch windows

/// A patch of side `patch_size` and the concentric square of side
/// `square_side` whose crossings with the network define border points.
///
/// `center` is the query point that plays the role of the patch center for
/// connectivity. Near the image border the patch is shifted to fit; `offset`
/// holds that shift, so the patch itself is centered on `center + offset`.
/// The patch center pixel is at local index patch_size / 2.
struct PatchWindow {
  Pixel center;
  int patch_size = 64;
  int square_side = 58;
  Pixel offset{0, 0};

  Pixel patch_center() const { return center + offset; }
  Pixel origin() const { return {patch_center().x - patch_size / 2, patch_center().y - patch_size / 2}; }
  int half_side() const { return square_side / 2; }
  bool fits(int width, int height) const;

  /// Throws InvariantError on inconsistent sizes.
  void validate() const;

  static PatchWindow centered(Pixel center, int patch_size, int square_side);
  /// Shifts the patch so it lies inside a width x height image; nullopt if
  /// the image is smaller than the patch.
  static std::optional<PatchWindow> clamped(Pixel center, int patch_size, int square_side, int width, int height);
};

/// Where the network meets the boundary of the window's square.
struct BorderPoint {
  Point pos;    // sub-pixel intersection, image coordinates
  Pixel pixel;  // nearest boundary pixel (half-away-from-zero per axis)
  ClassLabel label = ClassLabel::unlabeled;
  int node = -1;
  int component = -1;
};

struct ClipNode {
  Point pos;
  std::optional<int> vertex_id;  // nullopt for crossing points
};

/// A maximal run of one edge's polyline inside the open square.
struct ClipPiece {
  int from = -1;
  int to = -1;
  std::vector<Point> points;
  ClassLabel label = ClassLabel::unlabeled;
  std::size_t edge = 0;
  double arc_begin = 0.0;  // arc length along the source edge at points.front()
};

struct CenterLocation {
  std::size_t piece = 0;
  double distance = 0.0;
  double arc = 0.0;
};

struct ClippedSubgraph {
  PatchWindow window;
  std::vector<ClipNode> nodes;
  std::vector<ClipPiece> pieces;
  std::vector<BorderPoint> border_points;  // discovery order: edge index, then arc length
  std::vector<int> node_component;
  std::optional<CenterLocation> center;  // snap of window.center onto a piece
};

inline constexpr double kCenterSnapRadius = 2.0;

ClippedSubgraph clip_to_window(const NetworkGraph& graph, const PatchWindow& window);

enum class CenterConnectivity { connected, not_connected, no_center };

CenterConnectivity connected_in_patch(const ClippedSubgraph& clipped, const BorderPoint& border_point, bool same_class);

}  // namespace topotrace
