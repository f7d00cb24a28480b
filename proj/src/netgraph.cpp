#include "topotrace/netgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "topotrace/errors.hpp"
#include "topotrace/io.hpp"

namespace topotrace {

namespace {

std::string format_point(Point p) {
  std::ostringstream os;
  os << "(" << p.x << ", " << p.y << ")";
  return os.str();
}

bool is_vessel(ClassLabel label) {
  return label == ClassLabel::artery || label == ClassLabel::vein;
}

}  // namespace

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::artery: return "artery";
    case ClassLabel::vein: return "vein";
    case ClassLabel::road: return "road";
    case ClassLabel::unlabeled: break;
  }
  return "unlabeled";
}

std::optional<ClassLabel> parse_label(std::string_view text) {
  if (text == "artery") return ClassLabel::artery;
  if (text == "vein") return ClassLabel::vein;
  if (text == "road") return ClassLabel::road;
  if (text == "unlabeled") return ClassLabel::unlabeled;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// NetworkGraph

NetworkGraph::NetworkGraph(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw InvariantError("graph dimensions must be positive, got " + std::to_string(width) + "x" +
                         std::to_string(height));
  }
}

const Vertex& NetworkGraph::vertex(int id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw InvariantError("unknown vertex id " + std::to_string(id));
  return vertices_[it->second];
}

int NetworkGraph::add_vertex(Point pos) {
  const int id = next_id_;
  add_vertex(id, pos);
  return id;
}

void NetworkGraph::add_vertex(int id, Point pos) {
  if (index_.contains(id)) throw InvariantError("duplicate vertex id " + std::to_string(id));
  if (!std::isfinite(pos.x) || !std::isfinite(pos.y) || !in_bounds(pos)) {
    throw InvariantError("vertex " + std::to_string(id) + ": coordinate out of bounds " + format_point(pos));
  }
  index_.emplace(id, vertices_.size());
  vertices_.push_back({id, pos});
  next_id_ = std::max(next_id_, id + 1);
}

std::size_t NetworkGraph::add_edge(int u, int v, std::vector<Point> points, ClassLabel label) {
  const std::string name = "edge " + std::to_string(edges_.size());
  if (!index_.contains(u)) throw InvariantError(name + ": unknown vertex id " + std::to_string(u));
  if (!index_.contains(v)) throw InvariantError(name + ": unknown vertex id " + std::to_string(v));
  const Point pu = vertex(u).pos;
  const Point pv = vertex(v).pos;
  if (points.empty()) points = {pu, pv};
  if (points.size() < 2) throw InvariantError(name + ": polyline needs at least 2 points");
  if (points.front() != pu) throw InvariantError(name + ": first point does not match vertex " + std::to_string(u));
  if (points.back() != pv) throw InvariantError(name + ": last point does not match vertex " + std::to_string(v));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].x) || !std::isfinite(points[i].y) || !in_bounds(points[i])) {
      throw InvariantError(name + ": coordinate out of bounds " + format_point(points[i]));
    }
    if (i > 0 && points[i] == points[i - 1]) {
      throw InvariantError(name + ": repeated consecutive point " + format_point(points[i]));
    }
  }
  const bool road = label == ClassLabel::road;
  const bool vessel = is_vessel(label);
  if ((road && has_vessel_) || (vessel && has_road_)) {
    throw InvariantError(name + ": graph mixes road with artery/vein labels");
  }
  has_road_ = has_road_ || road;
  has_vessel_ = has_vessel_ || vessel;
  edges_.push_back({u, v, label, std::move(points)});
  return edges_.size() - 1;
}

std::vector<int> NetworkGraph::degrees() const {
  std::vector<int> deg(vertices_.size(), 0);
  for (const auto& e : edges_) {
    ++deg[index_.at(e.u)];
    ++deg[index_.at(e.v)];
  }
  return deg;
}

// ---------------------------------------------------------------------------
// JSON format

namespace {

using Json = nlohmann::ordered_json;

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

const Json& member(const Json& object, const char* key, const std::string& where) {
  if (!object.is_object()) throw ParseError(where + ": expected an object");
  auto it = object.find(key);
  if (it == object.end()) throw ParseError(where + ": missing \"" + key + "\"");
  return *it;
}

int as_int(const Json& value, const std::string& where) {
  if (!value.is_number_integer()) throw ParseError(where + ": expected an integer");
  const auto v = value.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ParseError(where + ": integer out of range");
  }
  return static_cast<int>(v);
}

double as_number(const Json& value, const std::string& where) {
  if (!value.is_number()) throw ParseError(where + ": expected a number");
  return value.get<double>();
}

Point as_point(const Json& value, const std::string& where) {
  if (!value.is_array() || value.size() != 2) throw ParseError(where + ": expected [x, y]");
  return {as_number(value[0], where + "[0]"), as_number(value[1], where + "[1]")};
}

// Integral coordinates are written without a fractional part so documents
// that use integer pixel positions round-trip unchanged.
Json number(double v) {
  if (std::floor(v) == v && std::abs(v) < 9.0e15) return Json(static_cast<std::int64_t>(v));
  return Json(v);
}

}  // namespace

NetworkGraph parse_graph(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text.begin(), json_text.end());
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, column] = line_column(json_text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(std::string("malformed graph document: ") + e.what(), line, column);
  }
  if (!doc.is_object()) throw ParseError("graph document: top level must be an object");

  NetworkGraph graph(as_int(member(doc, "width", "graph"), "width"), as_int(member(doc, "height", "graph"), "height"));

  const Json& vertices = member(doc, "vertices", "graph");
  if (!vertices.is_array()) throw ParseError("vertices: expected an array");
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const std::string where = "vertices[" + std::to_string(i) + "]";
    const Json& v = vertices[i];
    graph.add_vertex(as_int(member(v, "id", where), where + ".id"),
                     {as_number(member(v, "x", where), where + ".x"), as_number(member(v, "y", where), where + ".y")});
  }

  const Json& edges = member(doc, "edges", "graph");
  if (!edges.is_array()) throw ParseError("edges: expected an array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string where = "edges[" + std::to_string(i) + "]";
    const Json& e = edges[i];
    const Json& label_json = member(e, "label", where);
    if (!label_json.is_string()) throw ParseError(where + ".label: expected a string");
    const auto label = parse_label(label_json.get<std::string>());
    if (!label) throw ParseError(where + ".label: unknown label \"" + label_json.get<std::string>() + "\"");
    const Json& pts = member(e, "points", where);
    if (!pts.is_array()) throw ParseError(where + ".points: expected an array");
    std::vector<Point> points;
    points.reserve(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) {
      points.push_back(as_point(pts[k], where + ".points[" + std::to_string(k) + "]"));
    }
    if (points.size() < 2) throw InvariantError("edge " + std::to_string(i) + ": polyline needs at least 2 points");
    graph.add_edge(as_int(member(e, "u", where), where + ".u"), as_int(member(e, "v", where), where + ".v"),
                   std::move(points), *label);
  }
  return graph;
}

std::string serialize_graph(const NetworkGraph& graph) {
  Json doc;
  doc["width"] = graph.width();
  doc["height"] = graph.height();
  Json vertices = Json::array();
  for (const auto& v : graph.vertices()) {
    vertices.push_back(Json{{"id", v.id}, {"x", number(v.pos.x)}, {"y", number(v.pos.y)}});
  }
  doc["vertices"] = std::move(vertices);
  Json edges = Json::array();
  for (const auto& e : graph.edges()) {
    Json points = Json::array();
    for (const auto& p : e.points) points.push_back(Json::array({number(p.x), number(p.y)}));
    edges.push_back(Json{{"u", e.u}, {"v", e.v}, {"label", std::string(to_string(e.label))}, {"points", std::move(points)}});
  }
  doc["edges"] = std::move(edges);
  return doc.dump() + "\n";
}

NetworkGraph load_graph(const std::filesystem::path& path) {
  return parse_graph(read_file(path));
}

void save_graph(const std::filesystem::path& path, const NetworkGraph& graph) {
  write_file_atomic(path, serialize_graph(graph));
}

// ---------------------------------------------------------------------------
// Rasterization

std::vector<Pixel> digital_line(Pixel a, Pixel b) {
  // Always walk from the row-major smaller endpoint so both argument orders
  // produce the same pixels.
  const bool swapped = row_major_less(b, a);
  if (swapped) std::swap(a, b);
  const int dx = std::abs(b.x - a.x);
  const int dy = std::abs(b.y - a.y);
  const int sx = b.x >= a.x ? 1 : -1;
  const int sy = b.y >= a.y ? 1 : -1;
  const bool steep = dy > dx;
  const int major = steep ? dy : dx;
  const int minor = steep ? dx : dy;

  std::vector<Pixel> out;
  out.reserve(static_cast<std::size_t>(major) + 1);
  int d = 2 * minor - major;
  Pixel p = a;
  for (int i = 0; i <= major; ++i) {
    out.push_back(p);
    if (d > 0) {
      if (steep) p.x += sx; else p.y += sy;
      d -= 2 * major;
    }
    d += 2 * minor;
    if (steep) p.y += sy; else p.x += sx;
  }
  if (swapped) std::reverse(out.begin(), out.end());
  return out;
}

void draw_polyline(SkeletonRaster& raster, const std::vector<Point>& points) {
  auto clamp_pixel = [&](Point p) {
    Pixel q = to_pixel(p);
    q.x = std::clamp(q.x, 0, raster.width() - 1);
    q.y = std::clamp(q.y, 0, raster.height() - 1);
    return q;
  };
  if (points.size() == 1) {
    raster[clamp_pixel(points.front())] = 1;
    return;
  }
  for (std::size_t i = 1; i < points.size(); ++i) {
    for (Pixel q : digital_line(clamp_pixel(points[i - 1]), clamp_pixel(points[i]))) raster[q] = 1;
  }
}

SkeletonRaster rasterize(const NetworkGraph& graph, std::optional<ClassLabel> class_filter) {
  SkeletonRaster raster(graph.width(), graph.height());
  for (const auto& e : graph.edges()) {
    if (class_filter && e.label != *class_filter) continue;
    draw_polyline(raster, e.points);
  }
  return raster;
}

// ---------------------------------------------------------------------------
// Patch windows

bool PatchWindow::fits(int width, int height) const {
  const Pixel o = origin();
  return o.x >= 0 && o.y >= 0 && o.x + patch_size <= width && o.y + patch_size <= height;
}

void PatchWindow::validate() const {
  const int h = half_side();
  const int c = patch_size / 2;
  if (patch_size < 3) throw InvariantError("patch size must be at least 3");
  if (square_side >= patch_size) throw InvariantError("square side must be smaller than the patch size");
  if (h < 1 || c - h < 0 || c + h > patch_size - 1) {
    throw InvariantError("square of side " + std::to_string(square_side) + " does not fit a patch of size " +
                         std::to_string(patch_size));
  }
}

PatchWindow PatchWindow::centered(Pixel center, int patch_size, int square_side) {
  PatchWindow w{center, patch_size, square_side, {0, 0}};
  w.validate();
  return w;
}

std::optional<PatchWindow> PatchWindow::clamped(Pixel center, int patch_size, int square_side, int width,
                                                int height) {
  PatchWindow w = centered(center, patch_size, square_side);
  if (width < patch_size || height < patch_size) return std::nullopt;
  const int c = patch_size / 2;
  const int px = std::clamp(center.x, c, width - patch_size + c);
  const int py = std::clamp(center.y, c, height - patch_size + c);
  w.offset = {px - center.x, py - center.y};
  return w;
}

// ---------------------------------------------------------------------------
// Clipping

namespace {

constexpr double kEps = 1e-9;

struct Square {
  double xmin, xmax, ymin, ymax;

  bool strictly_inside(Point p) const {
    return p.x > xmin + kEps && p.x < xmax - kEps && p.y > ymin + kEps && p.y < ymax - kEps;
  }
  bool on_boundary(Point p) const {
    const bool in = p.x >= xmin - kEps && p.x <= xmax + kEps && p.y >= ymin - kEps && p.y <= ymax + kEps;
    return in && !strictly_inside(p);
  }
  // Exact boundary coordinates once a point is known to lie on the boundary.
  Point snap(Point p) const {
    auto s = [](double v, double lo, double hi) {
      if (std::abs(v - lo) <= kEps) return lo;
      if (std::abs(v - hi) <= kEps) return hi;
      return std::clamp(v, lo, hi);
    };
    return {s(p.x, xmin, xmax), s(p.y, ymin, ymax)};
  }
};

// Liang-Barsky: parameter interval of a->b inside the closed square.
std::optional<std::pair<double, double>> clip_segment(Point a, Point b, const Square& sq) {
  double t0 = 0.0;
  double t1 = 1.0;
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - sq.xmin, sq.xmax - a.x, a.y - sq.ymin, sq.ymax - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return std::nullopt;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      if (r > t1) return std::nullopt;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return std::nullopt;
      t1 = std::min(t1, r);
    }
  }
  if (t0 > t1) return std::nullopt;
  return std::make_pair(t0, t1);
}

Point lerp(Point a, Point b, double t) {
  if (t <= 0.0) return a;
  if (t >= 1.0) return b;
  return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
}

struct DisjointSets {
  std::vector<int> parent;
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

ClippedSubgraph clip_to_window(const NetworkGraph& graph, const PatchWindow& window) {
  window.validate();
  ClippedSubgraph out;
  out.window = window;
  const Pixel pc = window.patch_center();
  const double h = window.half_side();
  const Square sq{pc.x - h, pc.x + h, pc.y - h, pc.y + h};

  std::unordered_map<int, int> vertex_node;
  std::vector<bool> node_is_border;
  auto vertex_node_for = [&](int id, Point pos) {
    auto [it, inserted] = vertex_node.try_emplace(id, static_cast<int>(out.nodes.size()));
    if (inserted) {
      out.nodes.push_back({pos, id});
      node_is_border.push_back(false);
    }
    return it->second;
  };
  auto crossing_node = [&](Point pos) {
    out.nodes.push_back({pos, std::nullopt});
    node_is_border.push_back(false);
    return static_cast<int>(out.nodes.size() - 1);
  };
  auto add_border = [&](int node, ClassLabel label) {
    if (node_is_border[node]) return;
    node_is_border[node] = true;
    const Point pos = sq.snap(out.nodes[node].pos);
    out.border_points.push_back({pos, to_pixel(pos), label, node, -1});
  };

  for (std::size_t ei = 0; ei < graph.edges().size(); ++ei) {
    const Edge& edge = graph.edges()[ei];
    const auto& pts = edge.points;
    const std::size_t nseg = pts.size() - 1;

    // Quick reject on the polyline bounding box.
    double bxmin = pts[0].x, bxmax = pts[0].x, bymin = pts[0].y, bymax = pts[0].y;
    for (const auto& p : pts) {
      bxmin = std::min(bxmin, p.x);
      bxmax = std::max(bxmax, p.x);
      bymin = std::min(bymin, p.y);
      bymax = std::max(bymax, p.y);
    }
    if (bxmax < sq.xmin - kEps || bxmin > sq.xmax + kEps || bymax < sq.ymin - kEps || bymin > sq.ymax + kEps) continue;

    std::vector<double> arc(pts.size(), 0.0);
    for (std::size_t k = 1; k < pts.size(); ++k) arc[k] = arc[k - 1] + distance(pts[k - 1], pts[k]);

    // Current open run: spans from (k0, t0) through the end of the last
    // accepted interval.
    struct Run {
      std::size_t k0;
      double t0;
      std::vector<Point> points;
    };
    std::optional<Run> run;
    std::size_t last_k = 0;
    double last_t = 0.0;

    auto close_run = [&]() {
      if (!run) return;
      const bool starts_at_u = run->k0 == 0 && run->t0 <= kEps;
      const bool ends_at_v = last_k == nseg - 1 && last_t >= 1.0 - kEps;
      const Point first = run->points.front();
      const Point last = run->points.back();
      const int from = starts_at_u ? vertex_node_for(edge.u, pts.front()) : crossing_node(sq.snap(first));
      const int to = ends_at_v ? vertex_node_for(edge.v, pts.back()) : crossing_node(sq.snap(last));
      if (!starts_at_u) run->points.front() = sq.snap(first);
      if (!ends_at_v) run->points.back() = sq.snap(last);
      const double arc_begin = arc[run->k0] + run->t0 * (arc[run->k0 + 1] - arc[run->k0]);
      if (sq.on_boundary(out.nodes[from].pos)) add_border(from, edge.label);
      if (sq.on_boundary(out.nodes[to].pos)) add_border(to, edge.label);
      out.pieces.push_back({from, to, std::move(run->points), edge.label, ei, arc_begin});
      run.reset();
    };

    for (std::size_t k = 0; k < nseg; ++k) {
      const auto interval = clip_segment(pts[k], pts[k + 1], sq);
      bool keep = false;
      if (interval && interval->second - interval->first > kEps) {
        const Point mid = lerp(pts[k], pts[k + 1], 0.5 * (interval->first + interval->second));
        keep = sq.strictly_inside(mid);
      }
      if (!keep) {
        close_run();
        continue;
      }
      const auto [t0, t1] = *interval;
      const bool continues = run && last_k + 1 == k && last_t >= 1.0 - kEps && t0 <= kEps;
      if (!continues) {
        close_run();
        run = Run{k, t0, {lerp(pts[k], pts[k + 1], t0)}};
      }
      const Point end = lerp(pts[k], pts[k + 1], t1);
      if (run->points.back() != end) run->points.push_back(end);
      last_k = k;
      last_t = t1;
      if (t1 < 1.0 - kEps) close_run();
    }
    close_run();
  }

  // Components over nodes joined by pieces.
  DisjointSets sets{std::vector<int>(out.nodes.size())};
  std::iota(sets.parent.begin(), sets.parent.end(), 0);
  for (const auto& piece : out.pieces) sets.unite(piece.from, piece.to);
  std::unordered_map<int, int> compact;
  out.node_component.resize(out.nodes.size());
  for (std::size_t i = 0; i < out.nodes.size(); ++i) {
    const int root = sets.find(static_cast<int>(i));
    auto [it, inserted] = compact.try_emplace(root, static_cast<int>(compact.size()));
    out.node_component[i] = it->second;
  }
  for (auto& bp : out.border_points) bp.component = out.node_component[bp.node];

  // Snap the query center onto the nearest piece.
  const Point c = to_point(window.center);
  for (std::size_t pi = 0; pi < out.pieces.size(); ++pi) {
    const auto& piece = out.pieces[pi];
    double along = piece.arc_begin;
    for (std::size_t k = 1; k < piece.points.size(); ++k) {
      double t = 0.0;
      const double d = point_segment_distance(c, piece.points[k - 1], piece.points[k], &t);
      const double seg_len = distance(piece.points[k - 1], piece.points[k]);
      const double at = along + t * seg_len;
      along += seg_len;
      if (d > kCenterSnapRadius) continue;
      const bool better = !out.center || d < out.center->distance - 1e-12 ||
                          (std::abs(d - out.center->distance) <= 1e-12 &&
                           (piece.edge < out.pieces[out.center->piece].edge ||
                            (piece.edge == out.pieces[out.center->piece].edge && at < out.center->arc)));
      if (better) out.center = CenterLocation{pi, d, at};
    }
  }
  return out;
}

CenterConnectivity connected_in_patch(const ClippedSubgraph& clipped, const BorderPoint& border_point,
                                      bool same_class) {
  if (!clipped.center) return CenterConnectivity::no_center;
  const ClipPiece& start = clipped.pieces[clipped.center->piece];
  if (!same_class) {
    return clipped.node_component[start.from] == border_point.component ? CenterConnectivity::connected
                                                                          : CenterConnectivity::not_connected;
  }
  std::vector<std::vector<std::size_t>> incident(clipped.nodes.size());
  for (std::size_t i = 0; i < clipped.pieces.size(); ++i) {
    if (clipped.pieces[i].label != start.label) continue;
    incident[clipped.pieces[i].from].push_back(i);
    incident[clipped.pieces[i].to].push_back(i);
  }
  std::vector<bool> reached(clipped.nodes.size(), false);
  std::vector<int> stack{start.from, start.to};
  reached[start.from] = reached[start.to] = true;
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    for (std::size_t pi : incident[n]) {
      for (int next : {clipped.pieces[pi].from, clipped.pieces[pi].to}) {
        if (!reached[next]) {
          reached[next] = true;
          stack.push_back(next);
        }
      }
    }
  }
  return reached[border_point.node] ? CenterConnectivity::connected : CenterConnectivity::not_connected;
}

}  // namespace topotrace
