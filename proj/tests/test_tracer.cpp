#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "topotrace/errors.hpp"
#include "topotrace/eval.hpp"
#include "topotrace/synth.hpp"
#include "topotrace/tracer.hpp"

using namespace topotrace;

namespace {

NetworkGraph plus_graph() {
  NetworkGraph g(200, 200);
  const int c = g.add_vertex({100, 100});
  for (Point end : {Point{42, 100}, Point{158, 100}, Point{100, 42}, Point{100, 158}}) {
    g.add_edge(c, g.add_vertex(end), {});
  }
  return g;
}

// Unrolls a compressed link polyline into unit 8-connected steps.
std::vector<Pixel> expand(const std::vector<Point>& poly) {
  std::vector<Pixel> out{to_pixel(poly.front())};
  for (std::size_t i = 1; i < poly.size(); ++i) {
    const Pixel a = to_pixel(poly[i - 1]);
    const Pixel b = to_pixel(poly[i]);
    const int dx = b.x - a.x, dy = b.y - a.y;
    REQUIRE((dx == 0 || dy == 0 || std::abs(dx) == std::abs(dy)));
    const int n = std::max(std::abs(dx), std::abs(dy));
    for (int k = 1; k <= n; ++k) out.push_back({a.x + k * (dx > 0) - k * (dx < 0), a.y + k * (dy > 0) - k * (dy < 0)});
  }
  return out;
}

double step_cost(const ConfidenceMap& conf, Pixel from, Pixel to) {
  const bool diag = from.x != to.x && from.y != to.y;
  return (1.0 - std::clamp(conf(to.x, to.y), 0.0, 1.0)) + kLinkEpsilon * (diag ? std::sqrt(2.0) : 1.0);
}

// Plain Bellman-Ford relaxation over the rectangle [x0, x1] x [y0, y1].
double optimal_cost(const ConfidenceMap& conf, Pixel s, Pixel t, int x0, int y0, int x1, int y1) {
  const int w = x1 - x0 + 1, h = y1 - y0 + 1;
  std::vector<double> d(static_cast<std::size_t>(w) * h, 1e18);
  auto at = [&](int x, int y) -> double& { return d[static_cast<std::size_t>(y - y0) * w + (x - x0)]; };
  at(s.x, s.y) = 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int px = x + dx, py = y + dy;
            if ((dx == 0 && dy == 0) || px < x0 || px > x1 || py < y0 || py > y1) continue;
            const double c = at(px, py) + step_cost(conf, {px, py}, {x, y});
            if (c < at(x, y) - 1e-12) {
              at(x, y) = c;
              changed = true;
            }
          }
        }
      }
    }
  }
  return at(t.x, t.y);
}

// Returns one fresh random heatmap per query.
class NoisePredictor : public Predictor {
 public:
  Heatmap predict(const PatchWindow& window, std::optional<ClassLabel>) const override {
    Heatmap h(window.patch_size);
    std::uniform_real_distribution<double> u(0, 1);
    for (double& v : h.values()) v = u(rng_);
    return h;
  }

 private:
  mutable std::mt19937_64 rng_{77};
};

class SmallPredictor : public Predictor {
 public:
  Heatmap predict(const PatchWindow&, std::optional<ClassLabel>) const override { return Heatmap(32); }
};

}  // namespace

TEST_CASE("seed selection") {
  ConfidenceMap conf(40, 20, 0.0);
  conf(5, 5) = 0.9;
  conf(8, 5) = 0.95;
  conf(30, 10) = 0.7;
  conf(35, 18) = 0.3;
  const auto seeds = select_seeds(conf, 0.5, 4);
  CHECK(seeds == std::vector<Pixel>{{8, 5}, {30, 10}});
  CHECK(select_seeds(conf, 0.5, 2).size() == 3);
  CHECK_THROWS_AS(select_seeds(conf, 0.5, 0), InvariantError);

  const NetworkGraph g = plus_graph();
  const auto from_graph = seeds_from_graph(g);
  CHECK(from_graph.size() == 5);
  CHECK(from_graph.front() == Pixel{100, 100});
}

TEST_CASE("link paths") {
  const PatchWindow w = PatchWindow::centered({32, 32}, 64, 58);
  CHECK(link_path({32, 32}, {32, 32}, nullptr, w).size() == 1);
  CHECK(link_path({32, 32}, {3, 40}, nullptr, w) == std::vector<Point>{{32, 32}, {3, 40}});

  // Uniform confidence: minimal-length path, which hugs the chord.
  const ConfidenceMap flat(64, 64, 1.0);
  CHECK(link_path({32, 32}, {3, 32}, &flat, w) == std::vector<Point>{{32, 32}, {3, 32}});
  const auto diag = link_path({32, 32}, {10, 10}, &flat, w);
  CHECK(diag == std::vector<Point>{{32, 32}, {10, 10}});

  // L-shaped ridge: the path follows the ridge instead of the chord.
  ConfidenceMap ridge(64, 64, 0.0);
  for (int x = 10; x <= 50; ++x) ridge(x, 50) = 1.0;
  for (int y = 10; y <= 50; ++y) ridge(50, y) = 1.0;
  const auto bent = link_path({10, 50}, {50, 10}, &ridge, w);
  for (const Pixel& p : expand(bent)) CHECK(ridge(p.x, p.y) == 1.0);
}

TEST_CASE("link paths are optimal against a relaxation oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> pos(0, 47);
  for (int n = 0; n < 25; ++n) {
    ConfidenceMap conf(48, 48);
    for (double& v : conf.values()) v = u(rng) < 0.3 ? 1.0 : u(rng) * 0.5;
    const PatchWindow w = *PatchWindow::clamped({24, 24}, 32, 26, 48, 48);
    const Pixel s{pos(rng), pos(rng)};
    const Pixel t{pos(rng), pos(rng)};
    if (s == t) continue;
    const Pixel o = w.origin();
    const int x0 = std::max(0, std::min({o.x, s.x, t.x}));
    const int y0 = std::max(0, std::min({o.y, s.y, t.y}));
    const int x1 = std::min(47, std::max({o.x + 31, s.x, t.x}));
    const int y1 = std::min(47, std::max({o.y + 31, s.y, t.y}));
    const auto path = expand(link_path(s, t, &conf, w));
    REQUIRE(path.front() == s);
    REQUIRE(path.back() == t);
    double cost = 0;
    for (std::size_t i = 1; i < path.size(); ++i) {
      CHECK(path[i].x >= x0);
      CHECK(path[i].x <= x1);
      CHECK(path[i].y >= y0);
      CHECK(path[i].y <= y1);
      cost += step_cost(conf, path[i - 1], path[i]);
    }
    CHECK(cost == doctest::Approx(optimal_cost(conf, s, t, x0, y0, x1, y1)).epsilon(1e-9));
  }
}

TEST_CASE("tracing a plus shape from its crossing") {
  const NetworkGraph gt = plus_graph();
  const OraclePredictor oracle(gt, GtMode::connectivity);
  const std::vector<Pixel> seeds{{100, 100}};
  const TraceResult r = trace(oracle, nullptr, seeds, TraceParams{}, 200, 200);
  const EvalReport rep = evaluate(r.graph, gt);
  CHECK(rep.F1R == doctest::Approx(1.0));
  CHECK(rep.C == doctest::Approx(1.0));
  CHECK(r.graph.edges().size() == 8);

  for (const Edge& e : r.graph.edges()) {
    for (const Point& p : e.points) {
      CHECK(chebyshev(to_pixel(p), to_pixel(e.points.front())) <= 64);
    }
  }

  const TraceResult again = trace(oracle, nullptr, seeds, TraceParams{}, 200, 200);
  CHECK(serialize_graph(again.graph) == serialize_graph(r.graph));
}

TEST_CASE("degenerate inputs") {
  const NetworkGraph gt = plus_graph();
  const OraclePredictor oracle(gt, GtMode::connectivity);
  const TraceResult empty = trace(oracle, nullptr, {}, TraceParams{}, 200, 200);
  CHECK(empty.graph.vertices().empty());
  CHECK(empty.iterations == 0);

  const CorruptOracle silent(oracle, 1.0, 0, 3);
  const std::vector<Pixel> seeds{{100, 100}, {42, 100}};
  const TraceResult lone = trace(silent, nullptr, seeds, TraceParams{}, 200, 200);
  CHECK(lone.graph.vertices().size() == 2);
  CHECK(lone.graph.edges().empty());

  const std::vector<Pixel> outside{{200, 5}};
  CHECK_THROWS_AS(trace(oracle, nullptr, outside, TraceParams{}, 200, 200), InvariantError);
  const std::vector<Pixel> one{{100, 100}};
  CHECK_THROWS_AS(trace(SmallPredictor{}, nullptr, one, TraceParams{}, 200, 200), InvariantError);
  const ConfidenceMap wrong(100, 100);
  CHECK_THROWS_AS(trace(oracle, &wrong, one, TraceParams{}, 200, 200), DimensionMismatch);

  const HeatmapStore store;
  const FilePredictor file(store);
  CHECK_THROWS_AS(trace(file, nullptr, one, TraceParams{}, 200, 200), PredictorMiss);

  TraceParams bad;
  bad.theta = 0;
  CHECK_THROWS_AS(bad.validate(), InvariantError);
}

TEST_CASE("the iteration cap holds against an adversarial predictor") {
  const NoisePredictor noise;
  const std::vector<Pixel> seeds{{128, 128}};
  TraceParams p;
  p.theta = 0.01;
  const TraceResult r = trace(noise, nullptr, seeds, p, 256, 256);
  CHECK(r.iterations <= 50 * 256 * 256 / (64 * 64));
  p.max_iterations = 7;
  CHECK(trace(noise, nullptr, seeds, p, 256, 256).iterations <= 7);
}

TEST_CASE("snapshots grow monotonically") {
  SynthParams sp;
  sp.rng_seed = 4;
  const NetworkGraph gt = generate_network(sp);
  const ConfidenceMap conf = render_confidence(gt, 2);
  const OraclePredictor oracle(gt, GtMode::connectivity);
  TraceParams p;
  p.snapshot_every = 3;
  const TraceResult r = trace(oracle, &conf, select_seeds(conf, p.seed_threshold, p.seed_min_dist), p, 256, 256);
  REQUIRE(r.snapshots.size() >= 2);
  for (std::size_t k = 1; k < r.snapshots.size(); ++k) {
    for (std::size_t i = 0; i < r.snapshots[k].size(); ++i) {
      if (r.snapshots[k - 1].values()[i]) CHECK(r.snapshots[k].values()[i]);
    }
  }
  const SkeletonRaster final_raster = rasterize(r.graph);
  for (std::size_t i = 0; i < final_raster.size(); ++i) {
    if (r.snapshots.back().values()[i]) CHECK(final_raster.values()[i]);
  }
  CHECK(evaluate(r.graph, gt).F1R > 0.95);

  p.order = FrontierOrder::lifo;
  const TraceResult dfs = trace(oracle, &conf, select_seeds(conf, p.seed_threshold, p.seed_min_dist), p, 256, 256);
  CHECK(evaluate(dfs.graph, gt).F1R > 0.95);
}

TEST_CASE("class-constrained tracing of two interleaved classes") {
  NetworkGraph gt(200, 200);
  gt.add_edge(gt.add_vertex({20, 60}), gt.add_vertex({180, 60}), {}, ClassLabel::artery);
  gt.add_edge(gt.add_vertex({20, 140}), gt.add_vertex({180, 140}), {}, ClassLabel::vein);
  const int j = gt.add_vertex({100, 140});
  gt.add_edge(j, gt.add_vertex({100, 80}), {}, ClassLabel::vein);

  NetworkGraph art(200, 200), vein(200, 200);
  for (const Edge& e : gt.edges()) {
    NetworkGraph& dst = e.label == ClassLabel::artery ? art : vein;
    dst.add_edge(dst.add_vertex(gt.vertices()[e.u].pos), dst.add_vertex(gt.vertices()[e.v].pos), {}, e.label);
  }
  const OraclePredictor oracle(gt, GtMode::connectivity_av);
  const NetworkGraph out = trace_av(oracle, render_confidence(art, 2), render_confidence(vein, 2), TraceParams{});
  CHECK(evaluate(out, gt, 2, ClassLabel::artery).F1R > 0.95);
  CHECK(evaluate(out, gt, 2, ClassLabel::vein).F1R > 0.95);
  CHECK(evaluate(out, gt).C > 0.95);
  CHECK_THROWS_AS(trace_av(oracle, ConfidenceMap(200, 200), ConfidenceMap(100, 200), TraceParams{}), DimensionMismatch);
}

TEST_CASE("seeds on blank and blob maps") {
  CHECK(select_seeds(ConfidenceMap(64, 64, 0.0), 0.5, 20).empty());

  NetworkGraph blobs(256, 64);
  blobs.add_edge(blobs.add_vertex({60, 32}), blobs.add_vertex({61, 32}), {});
  const ConfidenceMap one = render_confidence(blobs, 3);
  CHECK(select_seeds(one, 0.5, 20).size() == 1);

  blobs.add_edge(blobs.add_vertex({160, 32}), blobs.add_vertex({161, 32}), {});
  const auto two = select_seeds(render_confidence(blobs, 3), 0.5, 20);
  REQUIRE(two.size() == 2);
  CHECK(std::abs(two[0].x - two[1].x) >= 95);
}

TEST_CASE("a blank vein map leaves only artery geometry") {
  NetworkGraph gt(200, 200);
  gt.add_edge(gt.add_vertex({20, 60}), gt.add_vertex({180, 60}), {}, ClassLabel::artery);
  gt.add_edge(gt.add_vertex({20, 140}), gt.add_vertex({180, 140}), {}, ClassLabel::vein);
  NetworkGraph art(200, 200);
  art.add_edge(art.add_vertex({20, 60}), art.add_vertex({180, 60}), {}, ClassLabel::artery);
  const OraclePredictor oracle(gt, GtMode::connectivity_av);
  const NetworkGraph out = trace_av(oracle, render_confidence(art, 2), ConfidenceMap(200, 200, 0.0), TraceParams{});
  REQUIRE(!out.edges().empty());
  for (const Edge& e : out.edges()) {
    CHECK(e.label == ClassLabel::artery);
    for (const Point& p : e.points) CHECK(std::abs(p.y - 60) <= 2);
  }
  CHECK(evaluate(out, gt, 2, ClassLabel::artery).F1R > 0.95);
  CHECK(evaluate(out, gt, 2, ClassLabel::vein).R == 0.0);
}
