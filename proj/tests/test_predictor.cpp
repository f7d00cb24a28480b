#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "topotrace/errors.hpp"
#include "topotrace/io.hpp"
#include "topotrace/patchgt.hpp"
#include "topotrace/pgm.hpp"
#include "topotrace/predictor.hpp"

using namespace topotrace;
namespace fs = std::filesystem;

namespace {

NetworkGraph cross_graph() {
  NetworkGraph g(200, 200);
  const int c = g.add_vertex({100, 100});
  g.add_edge(c, g.add_vertex({20, 100}), {}, ClassLabel::artery);
  g.add_edge(c, g.add_vertex({180, 100}), {}, ClassLabel::artery);
  g.add_edge(g.add_vertex({150, 20}), g.add_vertex({150, 180}), {}, ClassLabel::vein);
  return g;
}

// Straightforward reference: scan for the best unsuppressed cell each round.
std::vector<Peak> reference_nms(const Heatmap& h, double threshold, int radius) {
  Grid<std::uint8_t> dead(h.width(), h.height());
  std::vector<Peak> out;
  while (true) {
    int bx = -1, by = -1;
    for (int y = 0; y < h.height(); ++y) {
      for (int x = 0; x < h.width(); ++x) {
        if (dead(x, y) || h(x, y) < threshold) continue;
        if (bx < 0 || h(x, y) > h(bx, by)) {
          bx = x;
          by = y;
        }
      }
    }
    if (bx < 0) return out;
    out.push_back({bx, by, h(bx, by)});
    for (int y = std::max(0, by - radius); y <= std::min(h.height() - 1, by + radius); ++y) {
      for (int x = std::max(0, bx - radius); x <= std::min(h.width() - 1, bx + radius); ++x) dead(x, y) = 1;
    }
  }
}

}  // namespace

TEST_CASE("oracle heatmaps peak at connected border points") {
  const NetworkGraph g = cross_graph();
  const OraclePredictor oracle(g, GtMode::connectivity);
  const PatchWindow w = PatchWindow::centered({100, 100}, 64, 58);
  const Heatmap h = oracle.predict(w, std::nullopt);
  const auto peaks = extract_peaks(h, 0.5, 3).peaks;
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0] == Peak{3, 32, 1.0});
  CHECK(peaks[1] == Peak{61, 32, 1.0});
  CHECK(oracle_predict(g, w, GtMode::connectivity) == h);
  CHECK(quantize_heatmap(h) == h);
}

TEST_CASE("class-aware oracle returns zeros for the other class") {
  const NetworkGraph g = cross_graph();
  const OraclePredictor oracle(g, GtMode::connectivity_av);
  const PatchWindow w = PatchWindow::centered({100, 100}, 64, 58);
  CHECK(oracle.predict(w, ClassLabel::vein) == Heatmap(64));
  CHECK(extract_peaks(oracle.predict(w, ClassLabel::artery), 0.5).peaks.size() == 2);
  CHECK_THROWS_AS(OraclePredictor(g, GtMode::connectivity, 0.0), InvariantError);
}

TEST_CASE("corrupted oracle") {
  const NetworkGraph g = cross_graph();
  const OraclePredictor oracle(g, GtMode::non_connectivity);
  const PatchWindow w = PatchWindow::centered({130, 100}, 64, 58);
  CHECK(CorruptOracle(oracle, 0.0, 0, 1).predict(w, std::nullopt) == oracle.predict(w, std::nullopt));
  CHECK(CorruptOracle(oracle, 1.0, 0, 1).predict(w, std::nullopt) == Heatmap(64));
  const CorruptOracle noisy(oracle, 0.3, 2, 42);
  CHECK(noisy.predict(w, std::nullopt) == CorruptOracle(oracle, 0.3, 2, 42).predict(w, std::nullopt));
  for (const Point& p : noisy.peak_points(w, std::nullopt)) {
    CHECK(p.x >= 0);
    CHECK(p.x <= 63);
  }
  CHECK_THROWS_AS(CorruptOracle(oracle, 1.5, 0, 1), InvariantError);
  CHECK_THROWS_AS(CorruptOracle(oracle, 0.5, -1, 1), InvariantError);

  // Higher drop rates keep a subset of what lower rates keep.
  int kept_low = 0, kept_high = 0;
  for (int x = 60; x < 140; ++x) {
    const PatchWindow win = PatchWindow::centered({x, 100}, 64, 58);
    kept_low += static_cast<int>(CorruptOracle(oracle, 0.2, 0, 5).peak_points(win, std::nullopt).size());
    kept_high += static_cast<int>(CorruptOracle(oracle, 0.7, 0, 5).peak_points(win, std::nullopt).size());
  }
  CHECK(kept_high < kept_low);
}

TEST_CASE("heatmap store round trip and lookup") {
  const fs::path dir = fs::temp_directory_path() / "topotrace_store_test";
  fs::remove_all(dir);
  Heatmap a(8), b(8);
  a(1, 2) = 0.5;
  b(3, 3) = 1.0;
  const HeatmapStore store({{{10, 10}, "", a}, {{10.5, 10}, "", b}, {{40, 7}, "sub/x.pgm", b}});
  store.save(dir);
  CHECK(fs::exists(dir / "sub" / "x.pgm"));
  const HeatmapStore back = HeatmapStore::load(dir);
  REQUIRE(back.entries().size() == 3);
  CHECK(back.entries()[0].relative_path == "heatmap_000000.pgm");
  CHECK(back.lookup({10, 10}).heatmap == quantize_heatmap(a));
  CHECK(back.lookup({10.4, 10}).heatmap == quantize_heatmap(b));
  CHECK(back.lookup({40.5, 7.5}).relative_path == "sub/x.pgm");
  try {
    back.lookup({100, 100});
    FAIL("expected a miss");
  } catch (const PredictorMiss& e) {
    CHECK(e.center() == Point{100, 100});
    CHECK(std::string(e.what()).find("(100, 100)") != std::string::npos);
  }
  const FilePredictor file(back);
  CHECK(file.predict(PatchWindow::centered({40, 7}, 8, 6), std::nullopt) == quantize_heatmap(b));

  write_file_atomic(dir / "manifest.txt", "1 2 connectivity heatmap_000000.pgm\n# comment\n\n");
  CHECK(HeatmapStore::load(dir).entries().size() == 1);
  write_file_atomic(dir / "manifest.txt", "1 two heatmap_000000.pgm\n");
  CHECK_THROWS_AS(HeatmapStore::load(dir), ParseError);
  write_file_atomic(dir / "manifest.txt", "1 2\n");
  CHECK_THROWS_AS(HeatmapStore::load(dir), ParseError);
  fs::remove_all(dir);
}

TEST_CASE("recording predictor keeps calls in order") {
  const NetworkGraph g = cross_graph();
  const OraclePredictor oracle(g, GtMode::connectivity);
  const RecordingPredictor rec(oracle);
  rec.predict(PatchWindow::centered({100, 100}, 64, 58), std::nullopt);
  rec.predict(PatchWindow::centered({60, 100}, 64, 58), std::nullopt);
  const HeatmapStore s = rec.to_store();
  REQUIRE(s.entries().size() == 2);
  CHECK(s.entries()[1].center == Point{60, 100});
}

TEST_CASE("peak extraction order, threshold and suppression") {
  Heatmap h(16);
  h(5, 5) = 0.9;
  h(6, 5) = 0.95;
  h(12, 2) = 0.95;
  h(1, 14) = 0.6;
  h(14, 14) = 0.4;
  const auto p = extract_peaks(h, 0.5, 3).peaks;
  REQUIRE(p.size() == 3);
  CHECK(p[0] == Peak{12, 2, 0.95});  // tie broken by smaller y
  CHECK(p[1] == Peak{6, 5, 0.95});
  CHECK(p[2] == Peak{1, 14, 0.6});
  CHECK(extract_peaks(h, 0.5, 1).peaks.size() == 3);
  CHECK(extract_peaks(h, 1.0, 3).peaks.empty());
  CHECK_THROWS_AS(extract_peaks(h, 0.0, 3), InvariantError);
  CHECK_THROWS_AS(extract_peaks(h, 1.1, 3), InvariantError);
  CHECK_THROWS_AS(extract_peaks(h, 0.5, 0), InvariantError);
  CHECK(extract_peaks(Heatmap(16), 0.1).peaks.empty());
}

TEST_CASE("peak extraction matches the reference on random maps with ties") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  for (int n = 0; n < 300; ++n) {
    Heatmap h(32);
    for (double& v : h.values()) v = std::floor(u(rng) * 6) / 5;  // six levels: many ties
    const double t = 0.1 + 0.8 * u(rng);
    const int r = 1 + n % 4;
    REQUIRE(extract_peaks(h, t, r).peaks == reference_nms(h, t, r));
  }
}

TEST_CASE("masked peak picking skips disallowed cells") {
  Grid<double> g(8, 8, 0.0);
  g(2, 2) = 1.0;
  g(6, 6) = 0.8;
  Grid<std::uint8_t> allowed(8, 8, 1);
  allowed(2, 2) = 0;
  const auto p = pick_peaks(g, 0.5, 2, &allowed).peaks;
  REQUIRE(p.size() == 1);
  CHECK(p[0].x == 6);
}

TEST_CASE("off-network centers get an empty heatmap") {
  const NetworkGraph g = cross_graph();
  const OraclePredictor oracle(g, GtMode::connectivity);
  CHECK(oracle.predict(PatchWindow::centered({100, 140}, 64, 58), std::nullopt) == Heatmap(64));
  const OraclePredictor av(g, GtMode::connectivity_av);
  // Center on the vein: only vein-connected border points.
  const PatchWindow w = PatchWindow::centered({150, 60}, 64, 58);
  CHECK(av.predict(w, ClassLabel::artery) == Heatmap(64));
  const auto peaks = extract_peaks(av.predict(w, ClassLabel::vein), 0.5).peaks;
  REQUIRE(peaks.size() == 2);
  for (const Peak& p : peaks) CHECK(p.x == 32);
}

TEST_CASE("drop rate is honored statistically") {
  // Many short vertical lines give every window a dozen border points.
  NetworkGraph g(1000, 200);
  for (int x = 10; x < 990; x += 9) g.add_edge(g.add_vertex({double(x), 10}), g.add_vertex({double(x), 190}), {});
  const OraclePredictor oracle(g, GtMode::non_connectivity);
  const CorruptOracle half(oracle, 0.5, 0, 123);
  std::size_t total = 0, kept = 0;
  for (int cx = 40; total < 10000; cx = cx >= 950 ? 40 : cx + 1) {
    for (int cy : {40, 100, 160}) {
      const PatchWindow w = PatchWindow::centered({cx, cy}, 64, 58);
      total += oracle.peak_points(w, std::nullopt).size();
      kept += half.peak_points(w, std::nullopt).size();
    }
  }
  CHECK(std::abs(static_cast<double>(kept) / total - 0.5) <= 0.02);
}

TEST_CASE("peaks of rendered gaussians") {
  const std::vector<Point> one{{10, 10}};
  const auto single = extract_peaks(make_gt_heatmap(one, 64, 2.0), 0.2).peaks;
  REQUIRE(single.size() == 1);
  CHECK(single[0].x == 10);
  CHECK(single[0].y == 10);
  // Unit-width Gaussians; at sigma 2 the summed aprons beyond the NMS ball
  // exceed 0.2 and draw extra peaks.
  const std::vector<Point> close{{20, 20}, {22, 20}};
  CHECK(extract_peaks(make_gt_heatmap(close, 64, 1.0), 0.2, 3).peaks.size() == 1);
  const std::vector<Point> apart{{20, 20}, {28, 20}};
  CHECK(extract_peaks(make_gt_heatmap(apart, 64, 1.0), 0.2, 3).peaks.size() == 2);
  CHECK(extract_peaks(make_gt_heatmap(apart, 64, 2.0), 0.5, 3).peaks.size() == 2);
}

TEST_CASE("higher thresholds keep a subset of peaks") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int n = 0; n < 100; ++n) {
    Heatmap h(32);
    for (double& v : h.values()) v = u(rng);
    const double lo = 0.2 + 0.3 * u(rng), hi = lo + 0.4 * u(rng);
    std::set<std::pair<int, int>> low;
    for (const Peak& p : extract_peaks(h, lo).peaks) low.insert({p.x, p.y});
    for (const Peak& p : extract_peaks(h, hi).peaks) CHECK(low.count({p.x, p.y}) == 1);
  }
}

TEST_CASE("oracle peaks recover separated ground-truth points") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> pos(40, 216);
  std::size_t checked = 0;
  for (int n = 0; n < 200; ++n) {
    NetworkGraph g(256, 256);
    for (int k = 0; k < 3; ++k) g.add_edge(g.add_vertex({pos(rng), pos(rng)}), g.add_vertex({pos(rng), pos(rng)}), {});
    const PatchWindow w = PatchWindow::centered({128, 128}, 64, 58);
    const auto truth = to_patch_coordinates(gt_points(g, w, GtMode::non_connectivity), w);
    bool separated = true;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      for (std::size_t j = i + 1; j < truth.size(); ++j) separated = separated && distance(truth[i], truth[j]) >= 8;
    }
    if (!separated) continue;
    const auto peaks = extract_peaks(oracle_predict(g, w, GtMode::non_connectivity), 0.5, 3).peaks;
    REQUIRE(peaks.size() == truth.size());
    for (const Point& t : truth) {
      bool found = false;
      for (const Peak& p : peaks) found = found || chebyshev(Pixel{p.x, p.y}, to_pixel(t)) <= 1;
      CHECK(found);
    }
    ++checked;
  }
  CHECK(checked > 50);
}
