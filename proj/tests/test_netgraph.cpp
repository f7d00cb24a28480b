#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>
#include <set>

#include "topotrace/errors.hpp"
#include "topotrace/netgraph.hpp"
#include "topotrace/patchgt.hpp"
#include "topotrace/synth.hpp"

using namespace topotrace;

namespace {

NetworkGraph segment_graph(int w, int h, Point a, Point b, ClassLabel label = ClassLabel::unlabeled) {
  NetworkGraph g(w, h);
  const int u = g.add_vertex(a);
  const int v = g.add_vertex(b);
  g.add_edge(u, v, {}, label);
  return g;
}

std::set<std::pair<double, double>> positions(const std::vector<BorderPoint>& pts) {
  std::set<std::pair<double, double>> out;
  for (const auto& p : pts) out.emplace(p.pos.x, p.pos.y);
  return out;
}

}  // namespace

TEST_CASE("graph serialization round-trips byte for byte") {
  NetworkGraph g(100, 80);
  const int a = g.add_vertex({10, 10});
  const int b = g.add_vertex({50.5, 20.25});
  const int c = g.add_vertex({90, 70});
  g.add_edge(a, b, {{10, 10}, {30, 12}, {50.5, 20.25}}, ClassLabel::artery);
  g.add_edge(b, c, {}, ClassLabel::vein);
  const std::string text = serialize_graph(g);
  const NetworkGraph back = parse_graph(text);
  CHECK(back == g);
  CHECK(serialize_graph(back) == text);
  CHECK(text.find("\"x\":10,") != std::string::npos);  // integral coordinates stay integers
}

TEST_CASE("empty point list means a straight segment") {
  const NetworkGraph g = segment_graph(50, 50, {1, 2}, {40, 30});
  REQUIRE(g.edges().size() == 1);
  CHECK(g.edges()[0].points == std::vector<Point>{{1, 2}, {40, 30}});
}

TEST_CASE("malformed documents report line and column") {
  const std::string bad = "{\"width\": 10,\n \"height\": 10,\n \"vertices\": [,]}";
  try {
    parse_graph(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_graph("[1, 2]"), ParseError);
  CHECK_THROWS_AS(parse_graph(R"({"width": 10, "height": 10, "vertices": []})"), ParseError);
  CHECK_THROWS_AS(parse_graph(R"({"width": 10, "height": 10, "vertices": [], "edges": [
      {"u": 0, "v": 1, "label": "river", "points": []}]})"),
                  ParseError);
}

TEST_CASE("graph invariants are enforced and name the culprit") {
  NetworkGraph g(20, 20);
  const int a = g.add_vertex({1, 1});
  const int b = g.add_vertex({10, 10});
  CHECK_THROWS_AS(g.add_vertex({20, 5}), InvariantError);
  CHECK_THROWS_AS(g.add_vertex(a, {3, 3}), InvariantError);
  CHECK_THROWS_AS(g.add_edge(a, 99, {}), InvariantError);
  CHECK_THROWS_AS(g.add_edge(a, b, {{1, 1}, {9, 9}}), InvariantError);
  CHECK_THROWS_AS(g.add_edge(a, b, {{1, 1}, {5, 5}, {5, 5}, {10, 10}}), InvariantError);
  CHECK_THROWS_AS(g.add_edge(a, b, {{1, 1}, {25, 5}, {10, 10}}), InvariantError);
  g.add_edge(a, b, {}, ClassLabel::road);
  try {
    g.add_edge(a, b, {}, ClassLabel::artery);
    FAIL("expected InvariantError");
  } catch (const InvariantError& e) {
    CHECK(std::string(e.what()).find("edge 1") != std::string::npos);
  }

  const std::string mixed = R"({"width": 20, "height": 20,
    "vertices": [{"id": 0, "x": 1, "y": 1}, {"id": 1, "x": 5, "y": 5}, {"id": 2, "x": 9, "y": 9}],
    "edges": [{"u": 0, "v": 1, "label": "road", "points": [[1,1],[5,5]]},
              {"u": 1, "v": 2, "label": "vein", "points": [[5,5],[9,9]]}]})";
  CHECK_THROWS_AS(parse_graph(mixed), InvariantError);
}

TEST_CASE("digital lines: 8-connected, symmetric, within half a pixel of the ideal line") {
  for (int x0 = -4; x0 <= 4; ++x0) {
    for (int y0 = -4; y0 <= 4; ++y0) {
      for (int x1 = -4; x1 <= 4; ++x1) {
        for (int y1 = -4; y1 <= 4; ++y1) {
          const Pixel a{x0 + 10, y0 + 10};
          const Pixel b{x1 + 10, y1 + 10};
          const auto line = digital_line(a, b);
          REQUIRE(line.front() == a);
          REQUIRE(line.back() == b);
          REQUIRE(line.size() == static_cast<std::size_t>(chebyshev(a, b)) + 1);
          for (std::size_t i = 1; i < line.size(); ++i) REQUIRE(chebyshev(line[i - 1], line[i]) == 1);
          auto rev = digital_line(b, a);
          std::reverse(rev.begin(), rev.end());
          REQUIRE(rev == line);
          // Along the major axis, the minor coordinate is the rounded ideal one.
          const int dx = b.x - a.x, dy = b.y - a.y;
          for (const Pixel& p : line) {
            if (std::abs(dx) >= std::abs(dy) && dx != 0) {
              const double ideal = a.y + static_cast<double>(dy) * (p.x - a.x) / dx;
              REQUIRE(std::abs(p.y - ideal) <= 0.5 + 1e-12);
            } else if (dy != 0) {
              const double ideal = a.x + static_cast<double>(dx) * (p.y - a.y) / dy;
              REQUIRE(std::abs(p.x - ideal) <= 0.5 + 1e-12);
            }
          }
        }
      }
    }
  }
}

TEST_CASE("rasterize draws every edge and honours the class filter") {
  NetworkGraph g(30, 30);
  const int c = g.add_vertex({15, 15});
  const int n = g.add_vertex({15, 5});
  const int e = g.add_vertex({25, 15});
  g.add_edge(c, n, {}, ClassLabel::artery);
  g.add_edge(c, e, {}, ClassLabel::vein);
  const SkeletonRaster all = rasterize(g);
  CHECK(all.count() == 21);
  CHECK(all(15, 5));
  CHECK(all(25, 15));
  CHECK(rasterize(g, ClassLabel::artery).count() == 11);
  CHECK(rasterize(g, ClassLabel::road).count() == 0);
}

TEST_CASE("patch windows") {
  CHECK_THROWS_AS(PatchWindow::centered({50, 50}, 64, 64), InvariantError);
  CHECK_THROWS_AS(PatchWindow::centered({50, 50}, 2, 1), InvariantError);
  const PatchWindow w = PatchWindow::centered({50, 50}, 64, 58);
  CHECK(w.origin() == Pixel{18, 18});
  CHECK(w.half_side() == 29);
  CHECK(w.fits(100, 100));
  CHECK_FALSE(PatchWindow::centered({20, 50}, 64, 58).fits(100, 100));

  const auto c = PatchWindow::clamped({5, 95}, 64, 58, 100, 100);
  REQUIRE(c);
  CHECK(c->center == Pixel{5, 95});
  CHECK(c->origin() == Pixel{0, 36});
  CHECK(c->fits(100, 100));
  CHECK_FALSE(PatchWindow::clamped({5, 5}, 64, 58, 50, 100));

  const PatchWindow odd = PatchWindow::centered({40, 40}, 65, 59);
  CHECK(odd.origin() == Pixel{8, 8});
}

TEST_CASE("clipping a line through the center") {
  const NetworkGraph g = segment_graph(200, 200, {20, 100}, {180, 100});
  const PatchWindow w = PatchWindow::centered({100, 100}, 64, 58);
  const ClippedSubgraph c = clip_to_window(g, w);
  REQUIRE(c.border_points.size() == 2);
  CHECK(positions(c.border_points) == std::set<std::pair<double, double>>{{71, 100}, {129, 100}});
  REQUIRE(c.center);
  for (const auto& bp : c.border_points) CHECK(connected_in_patch(c, bp, false) == CenterConnectivity::connected);
}

TEST_CASE("clipping curved and disjoint geometry") {
  const PatchWindow w = PatchWindow::centered({100, 100}, 64, 58);

  SUBCASE("fully outside") {
    const NetworkGraph g = segment_graph(200, 200, {0, 0}, {50, 10});
    const ClippedSubgraph c = clip_to_window(g, w);
    CHECK(c.border_points.empty());
    CHECK_FALSE(c.center);
  }
  SUBCASE("fully inside leaves no border point") {
    const NetworkGraph g = segment_graph(200, 200, {90, 90}, {110, 95});
    CHECK(clip_to_window(g, w).border_points.empty());
  }
  SUBCASE("corner cut away from the center is not connected") {
    NetworkGraph g = segment_graph(200, 200, {60, 100}, {140, 100});
    const int a = g.add_vertex({110, 60});
    const int b = g.add_vertex({140, 90});
    g.add_edge(a, b, {});
    const ClippedSubgraph c = clip_to_window(g, w);
    CHECK(c.border_points.size() == 4);
    CHECK(gt_points(g, w, GtMode::connectivity).size() == 2);
    int disconnected = 0;
    for (const auto& bp : c.border_points) disconnected += connected_in_patch(c, bp, false) == CenterConnectivity::not_connected;
    CHECK(disconnected == 2);
  }
  SUBCASE("an edge that leaves and re-enters only connects through the patch") {
    NetworkGraph g(200, 200);
    const int a = g.add_vertex({100, 100});
    const int b = g.add_vertex({110, 120});
    g.add_edge(a, b, {{100, 100}, {150, 100}, {150, 120}, {110, 120}});
    const auto con = positions(gt_points(g, w, GtMode::connectivity));
    const auto non = positions(gt_points(g, w, GtMode::non_connectivity));
    CHECK(con == std::set<std::pair<double, double>>{{129, 100}});
    CHECK(non == std::set<std::pair<double, double>>{{129, 100}, {129, 120}});
  }
  SUBCASE("segment lying on the square boundary is outside the open interior") {
    const NetworkGraph g = segment_graph(200, 200, {129, 80}, {129, 120});
    CHECK(clip_to_window(g, w).pieces.empty());
  }
}

TEST_CASE("center snaps onto nearby geometry only") {
  const PatchWindow w = PatchWindow::centered({100, 100}, 64, 58);
  CHECK(clip_to_window(segment_graph(200, 200, {60, 101}, {140, 101}), w).center);
  CHECK_FALSE(clip_to_window(segment_graph(200, 200, {60, 104}, {140, 104}), w).center);
}

// Independent check of connected_in_patch: BFS over pieces keyed by node.
TEST_CASE("connectivity agrees with a BFS over the clipped pieces on random lattices") {
  std::mt19937_64 rng(11);
  int windows = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthParams p;
    p.kind = SynthKind::grid;
    p.rng_seed = seed;
    p.deletion_rate = 0.3;
    const NetworkGraph g = generate_network(p);
    for (int k = 0; k < 30; ++k) {
      const Edge& e = g.edges()[std::uniform_int_distribution<std::size_t>(0, g.edges().size() - 1)(rng)];
      const Point a = e.points.front(), b = e.points.back();
      const double t = std::uniform_real_distribution<double>(0, 1)(rng);
      const auto w = PatchWindow::clamped(to_pixel({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}), 64, 58,
                                          g.width(), g.height());
      REQUIRE(w);
      const ClippedSubgraph c = clip_to_window(g, *w);
      if (!c.center) continue;
      ++windows;
      std::map<int, std::vector<int>> adj;
      for (const auto& piece : c.pieces) {
        adj[piece.from].push_back(piece.to);
        adj[piece.to].push_back(piece.from);
      }
      const ClipPiece& start = c.pieces[c.center->piece];
      std::set<int> seen{start.from, start.to};
      std::deque<int> q{start.from, start.to};
      while (!q.empty()) {
        const int n = q.front();
        q.pop_front();
        for (int m : adj[n]) {
          if (seen.insert(m).second) q.push_back(m);
        }
      }
      for (const auto& bp : c.border_points) {
        const bool expected = seen.count(bp.node) > 0;
        CHECK((connected_in_patch(c, bp, false) == CenterConnectivity::connected) == expected);
      }
    }
  }
  CHECK(windows > 200);
}
