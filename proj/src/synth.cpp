#include "topotrace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <random>

#include "topotrace/errors.hpp"

namespace topotrace {

void SynthParams::validate() const {
  if (width < 128 || height < 128) throw InvariantError("synthetic images must be at least 128x128");
  if (min_separation < 3) throw InvariantError("min separation must be at least 3 px");
  if (branches < 0) throw InvariantError("branch count must be non-negative");
  if (!(branch_length_min > 0 && branch_length_min <= branch_length_max)) {
    throw InvariantError("branch length range must satisfy 0 < min <= max");
  }
  if (branch_angle_jitter < 0 || branch_angle_jitter > 90) throw InvariantError("angle jitter must lie in [0, 90]");
  if (trees < 1) throw InvariantError("at least one tree is required");
  if (class_mix && !(*class_mix >= 0 && *class_mix <= 1)) throw InvariantError("class mix must lie in [0, 1]");
  if (!(deletion_rate >= 0 && deletion_rate < 1)) throw InvariantError("deletion rate must lie in [0, 1)");
}

namespace {

constexpr double kMargin = 4.0;
constexpr double kSegmentLength = 12.0;
constexpr double kHeadingDrift = 8.0;   // degrees per segment
constexpr double kSiblingSpread = 25.0;  // minimum deviation of a bifurcating child
constexpr int kAttemptsPerBranch = 40;
constexpr int kRestarts = 50;

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

struct Placed {
  int u, v;
  std::vector<Point> points;
};

class Layout {
 public:
  Layout(const SynthParams& p) : p_(p) {}

  bool inside(Point q) const {
    return q.x >= kMargin && q.y >= kMargin && q.x <= p_.width - 1 - kMargin && q.y <= p_.height - 1 - kMargin;
  }

  // Separation test of a candidate edge against every placed edge.
  bool separated(int u, int v, const std::vector<Point>& pts) const {
    const double ms = p_.min_separation;
    for (const Placed& e : placed_) {
      int shared = -1;
      if (e.u == u || e.v == u) shared = u;
      if (e.u == v || e.v == v) shared = v;
      const Point* anchor = nullptr;
      Point anchor_pos;
      if (shared >= 0) {
        anchor_pos = shared == u ? pts.front() : pts.back();
        anchor = &anchor_pos;
      }
      auto near = [&](Point a, Point b) {
        return anchor && (distance(a, *anchor) < 2 * ms || distance(b, *anchor) < 2 * ms);
      };
      for (std::size_t i = 1; i < pts.size(); ++i) {
        const bool s_near = near(pts[i - 1], pts[i]);
        for (std::size_t j = 1; j < e.points.size(); ++j) {
          if (s_near && near(e.points[j - 1], e.points[j])) continue;
          if (segment_distance(pts[i - 1], pts[i], e.points[j - 1], e.points[j]) < ms) return false;
        }
      }
    }
    return true;
  }

  void place(int u, int v, std::vector<Point> pts) { placed_.push_back({u, v, std::move(pts)}); }
  const std::vector<Placed>& placed() const { return placed_; }

 private:
  const SynthParams& p_;
  std::vector<Placed> placed_;
};

// A gently wandering polyline with integer vertices, or nullopt when it
// leaves the usable area or folds onto itself.
std::optional<std::vector<Point>> walk(Point start, double heading, double length, std::mt19937_64& rng,
                                       const Layout& layout) {
  std::uniform_real_distribution<double> drift(-radians(kHeadingDrift), radians(kHeadingDrift));
  const int segments = std::max(1, static_cast<int>(std::ceil(length / kSegmentLength)));
  const double step = length / segments;
  std::vector<Point> pts{start};
  Point at = start;
  for (int i = 0; i < segments; ++i) {
    heading += drift(rng);
    at = {at.x + step * std::cos(heading), at.y + step * std::sin(heading)};
    const Point q = to_point(to_pixel(at));
    if (!layout.inside(q)) return std::nullopt;
    if (q != pts.back()) pts.push_back(q);
  }
  if (pts.size() < 2) return std::nullopt;
  return pts;
}

double heading_of(const std::vector<Point>& pts) {
  const Point a = pts[pts.size() - 2];
  const Point b = pts.back();
  return std::atan2(b.y - a.y, b.x - a.x);
}

void grow_tree(NetworkGraph& g, Layout& layout, const SynthParams& p, ClassLabel label, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> length(p.branch_length_min, p.branch_length_max);
  const double cx = (p.width - 1) / 2.0;
  const double cy = (p.height - 1) / 2.0;

  // Root: starts anywhere in the middle 60% and heads roughly inwards.
  int root_u = -1;
  std::vector<Point> root;
  for (int attempt = 0; attempt < kAttemptsPerBranch * 5 && root.empty(); ++attempt) {
    const Point start = to_point(to_pixel({p.width * (0.2 + 0.6 * unit(rng)), p.height * (0.2 + 0.6 * unit(rng))}));
    const double inward = std::atan2(cy - start.y, cx - start.x);
    const double heading = inward + radians(90.0) * (2 * unit(rng) - 1);
    auto pts = walk(start, heading, length(rng), rng, layout);
    if (!pts) continue;
    // Root endpoints are new vertices, so every placed edge is non-adjacent.
    if (!layout.separated(-2, -3, *pts)) continue;
    root = std::move(*pts);
  }
  if (root.empty()) throw Error("could not satisfy separation");
  root_u = g.add_vertex(root.front());
  const int root_v = g.add_vertex(root.back());
  g.add_edge(root_u, root_v, root, label);
  layout.place(root_u, root_v, root);

  struct Tip {
    int vertex;
    double heading;
  };
  std::deque<Tip> tips{{root_v, heading_of(root)}};
  int remaining = p.branches;
  while (remaining > 0) {
    if (tips.empty()) throw Error("could not satisfy separation");
    const Tip tip = tips.front();
    tips.pop_front();
    const int children = std::min(remaining, 2);
    const Point base = g.vertex(tip.vertex).pos;
    for (int c = 0; c < children; ++c) {
      const double side = children == 1 ? 0.0 : (c == 0 ? -1.0 : 1.0);
      for (int attempt = 0; attempt < kAttemptsPerBranch; ++attempt) {
        double heading = tip.heading;
        if (children == 1) {
          heading += radians(p.branch_angle_jitter) * (2 * unit(rng) - 1);
        } else {
          heading += side * radians(kSiblingSpread + p.branch_angle_jitter * unit(rng));
        }
        auto pts = walk(base, heading, length(rng), rng, layout);
        if (!pts || !layout.separated(tip.vertex, -4, *pts)) continue;
        const int v = g.add_vertex(pts->back());
        g.add_edge(tip.vertex, v, *pts, label);
        layout.place(tip.vertex, v, *pts);
        tips.push_back({v, heading_of(*pts)});
        --remaining;
        break;
      }
    }
  }
}

NetworkGraph make_trees(const SynthParams& p) {
  std::mt19937_64 rng(p.rng_seed);
  std::vector<ClassLabel> labels(p.trees, ClassLabel::unlabeled);
  if (p.class_mix) {
    const int arteries = static_cast<int>(std::lround(*p.class_mix * p.trees));
    for (int i = 0; i < p.trees; ++i) labels[i] = i < arteries ? ClassLabel::artery : ClassLabel::vein;
    std::shuffle(labels.begin(), labels.end(), rng);
  }
  // A failed layout restarts from scratch; the generator keeps drawing from
  // the same stream, so the outcome is still a function of the seed.
  for (int restart = 0; restart < kRestarts; ++restart) {
    NetworkGraph g(p.width, p.height);
    Layout layout(p);
    try {
      for (int t = 0; t < p.trees; ++t) grow_tree(g, layout, p, labels[t], rng);
      return g;
    } catch (const Error&) {
    }
  }
  throw Error("could not satisfy separation");
}

NetworkGraph make_grid(const SynthParams& p) {
  std::mt19937_64 rng(p.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < kAttemptsPerBranch; ++attempt) {
    const double spacing = p.branch_length_min + (p.branch_length_max - p.branch_length_min) * unit(rng);
    const double jitter = 0.2 * spacing;
    const double span_x = p.width - 1 - 2 * (kMargin + jitter);
    const double span_y = p.height - 1 - 2 * (kMargin + jitter);
    const int nx = static_cast<int>(span_x / spacing) + 1;
    const int ny = static_cast<int>(span_y / spacing) + 1;
    if (nx < 2 || ny < 2) throw Error("lattice spacing too large for the image");
    const double ox = (p.width - 1 - (nx - 1) * spacing) / 2;
    const double oy = (p.height - 1 - (ny - 1) * spacing) / 2;
    std::vector<Point> nodes;
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        nodes.push_back(to_point(to_pixel({ox + i * spacing + jitter * (2 * unit(rng) - 1),
                                           oy + j * spacing + jitter * (2 * unit(rng) - 1)})));
      }
    }
    std::vector<std::pair<int, int>> links;
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int k = j * nx + i;
        if (i + 1 < nx && unit(rng) >= p.deletion_rate) links.emplace_back(k, k + 1);
        if (j + 1 < ny && unit(rng) >= p.deletion_rate) links.emplace_back(k, k + nx);
      }
    }
    Layout layout(p);
    bool ok = true;
    for (const auto& [a, b] : links) {
      std::vector<Point> pts{nodes[a], nodes[b]};
      if (!layout.separated(a, b, pts)) {
        ok = false;
        break;
      }
      layout.place(a, b, pts);
    }
    if (!ok) continue;
    NetworkGraph g(p.width, p.height);
    std::vector<int> ids(nodes.size(), -1);
    auto id_of = [&](int k) {
      if (ids[k] < 0) ids[k] = g.add_vertex(nodes[k]);
      return ids[k];
    };
    for (const auto& [a, b] : links) {
      const int u = id_of(a);
      const int v = id_of(b);
      g.add_edge(u, v, {nodes[a], nodes[b]}, ClassLabel::road);
    }
    return g;
  }
  throw Error("could not satisfy separation");
}

}  // namespace

NetworkGraph generate_network(const SynthParams& params) {
  params.validate();
  return params.kind == SynthKind::tree ? make_trees(params) : make_grid(params);
}

ConfidenceMap render_confidence(const NetworkGraph& graph, double line_width, double noise_sigma,
                                std::uint64_t rng_seed) {
  if (!(line_width >= 1.0)) throw InvariantError("line width must be at least 1");
  if (!(noise_sigma >= 0.0)) throw InvariantError("noise sigma must be non-negative");
  const SkeletonRaster lines = rasterize(graph);
  ConfidenceMap conf(graph.width(), graph.height());
  const int r = static_cast<int>(std::ceil(line_width));
  for (int y = 0; y < lines.height(); ++y) {
    for (int x = 0; x < lines.width(); ++x) {
      if (!lines(x, y)) continue;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (!conf.contains(x + dx, y + dy)) continue;
          const double v = 1.0 - std::hypot(dx, dy) / line_width;
          double& cell = conf(x + dx, y + dy);
          cell = std::max(cell, v);
        }
      }
    }
  }
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (double& v : conf.values()) v = std::clamp(v + noise(rng), 0.0, 1.0);
  }
  return conf;
}

}  // namespace topotrace
