#include "topotrace/tracer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <set>
#include <tuple>
#include <unordered_map>

#include "topotrace/errors.hpp"

namespace topotrace {

void TraceParams::validate() const {
  PatchWindow::centered({0, 0}, patch_size, square_side);
  if (!(theta > 0.0 && theta <= 1.0)) throw InvariantError("theta must lie in (0, 1]");
  if (nms_radius < 1) throw InvariantError("NMS radius must be at least 1");
  if (visit_radius < 1) throw InvariantError("visit radius must be at least 1");
  if (seed_min_dist < 1) throw InvariantError("seed min distance must be at least 1");
}

std::vector<Pixel> select_seeds(const ConfidenceMap& conf, double seed_threshold, int min_dist,
                                const Grid<std::uint8_t>* allowed) {
  if (min_dist < 1) throw InvariantError("seed min distance must be at least 1");
  std::vector<Pixel> seeds;
  for (const Peak& p : pick_peaks(conf, seed_threshold, min_dist, allowed).peaks) seeds.push_back({p.x, p.y});
  return seeds;
}

std::vector<Pixel> seeds_from_graph(const NetworkGraph& graph) {
  std::vector<Pixel> seeds;
  const auto deg = graph.degrees();
  for (std::size_t i = 0; i < graph.vertices().size(); ++i) {
    if (deg[i] != 2) seeds.push_back(to_pixel(graph.vertices()[i].pos));
  }
  if (seeds.empty() && !graph.vertices().empty()) seeds.push_back(to_pixel(graph.vertices().front().pos));
  return seeds;
}

// ---------------------------------------------------------------------------
// Linking

namespace {

std::vector<Point> compress_path(const std::vector<Pixel>& pixels) {
  std::vector<Point> out{to_point(pixels.front())};
  for (std::size_t i = 1; i + 1 < pixels.size(); ++i) {
    const Pixel d0 = pixels[i] - pixels[i - 1];
    const Pixel d1 = pixels[i + 1] - pixels[i];
    if (d0 != d1) out.push_back(to_point(pixels[i]));
  }
  if (pixels.size() > 1) out.push_back(to_point(pixels.back()));
  return out;
}

}  // namespace

std::vector<Point> link_path(Pixel center, Pixel peak, const ConfidenceMap* conf, const PatchWindow& window) {
  if (center == peak) return {to_point(center)};
  if (!conf) return {to_point(center), to_point(peak)};

  const Pixel o = window.origin();
  const int x0 = std::max(0, std::min({o.x, center.x, peak.x}));
  const int y0 = std::max(0, std::min({o.y, center.y, peak.y}));
  const int x1 = std::min(conf->width() - 1, std::max({o.x + window.patch_size - 1, center.x, peak.x}));
  const int y1 = std::min(conf->height() - 1, std::max({o.y + window.patch_size - 1, center.y, peak.y}));
  if (!conf->contains(center) || !conf->contains(peak)) throw InvariantError("link endpoints outside the image");
  const int w = x1 - x0 + 1;
  const int h = y1 - y0 + 1;

  // Costs in fixed point so equal-cost paths compare exactly equal.
  constexpr double kScale = 1e9;
  const std::int64_t axis_step = std::llround(kLinkEpsilon * kScale);
  const std::int64_t diag_step = std::llround(kLinkEpsilon * std::sqrt(2.0) * kScale);
  const double lx = peak.x - center.x;
  const double ly = peak.y - center.y;
  const double line_len = std::hypot(lx, ly);
  auto deviation = [&](int x, int y) {
    const double cross = std::abs((x - center.x) * ly - (y - center.y) * lx) / line_len;
    return static_cast<std::int64_t>(std::llround(cross * 1e6));
  };

  struct Key {
    std::int64_t cost;
    std::int64_t dev;
    bool operator<(const Key& b) const { return std::tie(cost, dev) < std::tie(b.cost, b.dev); }
  };
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<Key> best(n, Key{kInf, kInf});
  std::vector<int> parent(n, -1);
  auto index = [&](int x, int y) { return static_cast<std::size_t>(y - y0) * w + static_cast<std::size_t>(x - x0); };

  using Item = std::tuple<std::int64_t, std::int64_t, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  const std::size_t start = index(center.x, center.y);
  const std::size_t goal = index(peak.x, peak.y);
  best[start] = {0, 0};
  open.emplace(0, 0, start);
  while (!open.empty()) {
    const auto [cost, dev, at] = open.top();
    open.pop();
    if (Key{cost, dev} < best[at] || best[at] < Key{cost, dev}) continue;
    if (at == goal) break;
    const int ax = x0 + static_cast<int>(at % w);
    const int ay = y0 + static_cast<int>(at / w);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int bx = ax + dx;
        const int by = ay + dy;
        if (bx < x0 || bx > x1 || by < y0 || by > y1) continue;
        const double c = std::clamp((*conf)(bx, by), 0.0, 1.0);
        const std::int64_t step = std::llround((1.0 - c) * kScale) + (dx != 0 && dy != 0 ? diag_step : axis_step);
        const Key next{cost + step, dev + deviation(bx, by)};
        const std::size_t bi = index(bx, by);
        if (next < best[bi]) {
          best[bi] = next;
          parent[bi] = static_cast<int>(at);
          open.emplace(next.cost, next.dev, bi);
        }
      }
    }
  }

  std::vector<Pixel> pixels;
  for (int at = static_cast<int>(goal); at != -1; at = parent[at]) {
    pixels.push_back({x0 + at % w, y0 + at / w});
    if (static_cast<std::size_t>(at) == start) break;
  }
  std::reverse(pixels.begin(), pixels.end());
  return compress_path(pixels);
}

// ---------------------------------------------------------------------------
// Tracing

namespace {

class TraceRun {
 public:
  TraceRun(const Predictor& predictor, const ConfidenceMap* conf, const TraceParams& params, int width, int height)
      : predictor_(predictor),
        conf_(conf),
        params_(params),
        graph_(width, height),
        visited_(width, height),
        covered_(width, height),
        owner_(width, height, -1) {
    max_iterations_ = params.max_iterations
                          ? params.max_iterations
                          : std::max<std::size_t>(1, 50ull * width * height /
                                                         (static_cast<std::size_t>(params.patch_size) * params.patch_size));
    label_ = params.trace_class.value_or(params.edge_label);
  }

  TraceResult run(std::span<const Pixel> seeds) {
    for (Pixel s : seeds) {
      if (!visited_.contains(s)) {
        throw InvariantError("seed (" + std::to_string(s.x) + ", " + std::to_string(s.y) + ") outside the image");
      }
      frontier_.push_back(s);
    }
    while (true) {
      drain();
      if (!frontier_.empty() || !conf_ || result_.iterations >= max_iterations_) break;
      Grid<std::uint8_t> allowed(conf_->width(), conf_->height());
      auto a = allowed.values();
      auto v = visited_.values();
      auto c = covered_.values();
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = !v[i] && !c[i];
      const auto reseeds = select_seeds(*conf_, params_.seed_threshold, params_.seed_min_dist, &allowed);
      if (reseeds.empty()) break;
      ++result_.reseed_rounds;
      frontier_.insert(frontier_.end(), reseeds.begin(), reseeds.end());
    }
    result_.graph = std::move(graph_);
    return std::move(result_);
  }

 private:
  void drain() {
    while (!frontier_.empty() && result_.iterations < max_iterations_) {
      Pixel p;
      if (params_.order == FrontierOrder::fifo) {
        p = frontier_.front();
        frontier_.pop_front();
      } else {
        p = frontier_.back();
        frontier_.pop_back();
      }
      ++result_.iterations;
      if (!visited_[p]) process(p);
      if (params_.snapshot_every && result_.iterations % params_.snapshot_every == 0) {
        result_.snapshots.push_back(rasterize(graph_));
      }
    }
  }

  void process(Pixel p) {
    mark_ball(visited_, p, 1);
    const int pid = vertex_at(p).first;
    const Pixel from = to_pixel(graph_.vertex(pid).pos);
    const auto window =
        PatchWindow::clamped(p, params_.patch_size, params_.square_side, graph_.width(), graph_.height());
    if (!window) return;
    const Heatmap h = predictor_.predict(*window, params_.trace_class);
    ++result_.queries;
    if (h.side() != params_.patch_size) {
      throw InvariantError("predictor returned a " + std::to_string(h.side()) + " px heatmap, expected " +
                           std::to_string(params_.patch_size));
    }
    const Pixel o = window->origin();
    for (const Peak& peak : extract_peaks(h, params_.theta, params_.nms_radius).peaks) {
      Pixel q{o.x + peak.x, o.y + peak.y};
      q.x = std::clamp(q.x, 0, graph_.width() - 1);
      q.y = std::clamp(q.y, 0, graph_.height() - 1);
      const auto [qid, created] = vertex_at(q);
      if (qid == pid) continue;
      if (!linked_.emplace(std::min(pid, qid), std::max(pid, qid)).second) continue;
      const Pixel to = to_pixel(graph_.vertex(qid).pos);
      std::vector<Point> path = link_path(from, to, conf_, *window);
      graph_.add_edge(pid, qid, path, label_);
      cover(path);
      if (created && !visited_[q]) frontier_.push_back(q);
    }
  }

  // Existing vertex whose claim covers q, or a new vertex at q.
  std::pair<int, bool> vertex_at(Pixel q) {
    if (owner_[q] >= 0) return {owner_[q], false};
    const int id = graph_.add_vertex(to_point(q));
    const int r = params_.visit_radius;
    for (int y = std::max(0, q.y - r); y <= std::min(owner_.height() - 1, q.y + r); ++y) {
      for (int x = std::max(0, q.x - r); x <= std::min(owner_.width() - 1, q.x + r); ++x) {
        if (owner_(x, y) < 0) owner_(x, y) = id;
      }
    }
    return {id, true};
  }

  void mark_ball(Grid<std::uint8_t>& grid, Pixel c, std::uint8_t value) const {
    const int r = params_.visit_radius;
    for (int y = std::max(0, c.y - r); y <= std::min(grid.height() - 1, c.y + r); ++y) {
      for (int x = std::max(0, c.x - r); x <= std::min(grid.width() - 1, c.x + r); ++x) grid(x, y) = value;
    }
  }

  void cover(const std::vector<Point>& path) {
    if (!conf_) return;
    for (std::size_t i = 1; i < path.size(); ++i) {
      for (Pixel q : digital_line(to_pixel(path[i - 1]), to_pixel(path[i]))) mark_ball(covered_, q, 1);
    }
  }

  const Predictor& predictor_;
  const ConfidenceMap* conf_;
  TraceParams params_;
  NetworkGraph graph_;
  Grid<std::uint8_t> visited_;
  Grid<std::uint8_t> covered_;
  Grid<int> owner_;
  std::deque<Pixel> frontier_;
  std::set<std::pair<int, int>> linked_;
  std::size_t max_iterations_ = 0;
  ClassLabel label_ = ClassLabel::unlabeled;
  TraceResult result_;
};

}  // namespace

TraceResult trace(const Predictor& predictor, const ConfidenceMap* conf, std::span<const Pixel> seeds,
                  const TraceParams& params, int width, int height) {
  params.validate();
  if (conf && (conf->width() != width || conf->height() != height)) {
    throw DimensionMismatch("confidence map is " + std::to_string(conf->width()) + "x" + std::to_string(conf->height()) +
                            ", image is " + std::to_string(width) + "x" + std::to_string(height));
  }
  return TraceRun(predictor, conf, params, width, height).run(seeds);
}

NetworkGraph trace_av(const Predictor& predictor_av, const ConfidenceMap& conf_artery, const ConfidenceMap& conf_vein,
                      const TraceParams& params) {
  if (!conf_artery.same_shape(conf_vein)) {
    throw DimensionMismatch("artery map is " + std::to_string(conf_artery.width()) + "x" +
                            std::to_string(conf_artery.height()) + ", vein map is " + std::to_string(conf_vein.width()) +
                            "x" + std::to_string(conf_vein.height()));
  }
  NetworkGraph out(conf_artery.width(), conf_artery.height());
  for (auto [cls, conf] : {std::pair{ClassLabel::artery, &conf_artery}, std::pair{ClassLabel::vein, &conf_vein}}) {
    TraceParams run_params = params;
    run_params.trace_class = cls;
    const auto seeds = select_seeds(*conf, params.seed_threshold, params.seed_min_dist);
    const TraceResult run = trace(predictor_av, conf, seeds, run_params, conf->width(), conf->height());
    std::unordered_map<int, int> remap;
    for (const auto& v : run.graph.vertices()) remap[v.id] = out.add_vertex(v.pos);
    for (const auto& e : run.graph.edges()) out.add_edge(remap.at(e.u), remap.at(e.v), e.points, cls);
  }
  return out;
}

}  // namespace topotrace
