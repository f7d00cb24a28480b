#include "topotrace/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "topotrace/errors.hpp"
#include "topotrace/io.hpp"
#include "topotrace/pgm.hpp"

namespace topotrace {

// ---------------------------------------------------------------------------
// Oracle

OraclePredictor::OraclePredictor(const NetworkGraph& graph, GtMode mode, double sigma)
    : graph_(graph), mode_(mode), sigma_(sigma) {
  if (!(sigma > 0.0)) throw InvariantError("heatmap sigma must be positive");
  if (mode == GtMode::connectivity_av) require_vessel_labels(graph);
}

std::vector<Point> OraclePredictor::peak_points(const PatchWindow& window, std::optional<ClassLabel> cls) const {
  GtQuery q = query_gt(graph_, window, mode_);
  if (mode_ == GtMode::connectivity_av && cls && q.center_label != cls) return {};
  return to_patch_coordinates(q.points, window);
}

Heatmap OraclePredictor::predict(const PatchWindow& window, std::optional<ClassLabel> cls) const {
  return quantize_heatmap(make_gt_heatmap(peak_points(window, cls), window.patch_size, sigma_));
}

Heatmap oracle_predict(const NetworkGraph& graph, const PatchWindow& window, GtMode mode, double sigma) {
  return OraclePredictor(graph, mode, sigma).predict(window, std::nullopt);
}

CorruptOracle::CorruptOracle(const OraclePredictor& inner, double drop_rate, int jitter, std::uint64_t rng_seed)
    : inner_(inner), drop_rate_(drop_rate), jitter_(jitter), seed_(rng_seed) {
  if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) throw InvariantError("drop rate must lie in [0, 1]");
  if (jitter < 0) throw InvariantError("jitter must be non-negative");
}

std::vector<Point> CorruptOracle::peak_points(const PatchWindow& window, std::optional<ClassLabel> cls) const {
  std::vector<Point> points = inner_.peak_points(window, cls);
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(window.center.x), static_cast<std::uint32_t>(window.center.y)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> shift(-jitter_, jitter_);
  const double hi = window.patch_size - 1;
  std::vector<Point> kept;
  for (const Point& p : points) {
    // Always draw all three numbers so a point's fate does not depend on
    // the drop rate of earlier points.
    const double u = unit(rng);
    const int dx = shift(rng);
    const int dy = shift(rng);
    if (u < drop_rate_) continue;
    kept.push_back({std::clamp(p.x + dx, 0.0, hi), std::clamp(p.y + dy, 0.0, hi)});
  }
  return kept;
}

Heatmap CorruptOracle::predict(const PatchWindow& window, std::optional<ClassLabel> cls) const {
  return quantize_heatmap(make_gt_heatmap(peak_points(window, cls), window.patch_size, inner_.sigma()));
}

// ---------------------------------------------------------------------------
// Heatmap store

namespace {

std::int64_t bucket_key(std::int64_t bx, std::int64_t by) { return (bx << 32) ^ (by & 0xffffffff); }

std::string format_coordinate(double v) {
  std::ostringstream os;
  os.precision(17);
  if (std::floor(v) == v) {
    os << static_cast<std::int64_t>(v);
  } else {
    os << v;
  }
  return os.str();
}

}  // namespace

HeatmapStore::HeatmapStore(std::vector<StoreEntry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto bx = static_cast<std::int64_t>(std::floor(entries_[i].center.x));
    const auto by = static_cast<std::int64_t>(std::floor(entries_[i].center.y));
    buckets_[bucket_key(bx, by)].push_back(i);
  }
}

HeatmapStore HeatmapStore::load(const std::filesystem::path& directory) {
  const auto manifest_path = directory / "manifest.txt";
  std::istringstream manifest(read_file(manifest_path));
  std::vector<StoreEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string t; fields >> t;) tokens.push_back(t);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    // Three fields for predictor stores; four (with a mode column) for
    // ground-truth batch manifests. The path is always last.
    if (tokens.size() != 3 && tokens.size() != 4) {
      throw ParseError(manifest_path.string() + ": expected \"center_x center_y path\"", line_no, 1);
    }
    StoreEntry e;
    try {
      std::size_t used = 0;
      e.center.x = std::stod(tokens[0], &used);
      if (used != tokens[0].size()) throw std::invalid_argument(tokens[0]);
      e.center.y = std::stod(tokens[1], &used);
      if (used != tokens[1].size()) throw std::invalid_argument(tokens[1]);
    } catch (const std::logic_error&) {
      throw ParseError(manifest_path.string() + ": malformed center", line_no, 1);
    }
    e.relative_path = tokens.back();
    e.heatmap = load_heatmap(directory / e.relative_path);
    entries.push_back(std::move(e));
  }
  return HeatmapStore(std::move(entries));
}

void HeatmapStore::save(const std::filesystem::path& directory) const {
  std::filesystem::create_directories(directory);
  std::string manifest;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    std::string rel = entries_[i].relative_path;
    if (rel.empty()) {
      std::ostringstream name;
      name << "heatmap_" << std::setw(6) << std::setfill('0') << i << ".pgm";
      rel = name.str();
    }
    std::filesystem::create_directories((directory / rel).parent_path());
    save_heatmap(directory / rel, entries_[i].heatmap);
    manifest += format_coordinate(entries_[i].center.x) + " " + format_coordinate(entries_[i].center.y) + " " + rel + "\n";
  }
  write_file_atomic(directory / "manifest.txt", manifest);
}

const StoreEntry& HeatmapStore::lookup(Point center) const {
  const auto bx = static_cast<std::int64_t>(std::floor(center.x));
  const auto by = static_cast<std::int64_t>(std::floor(center.y));
  const StoreEntry* best = nullptr;
  std::size_t best_index = 0;
  double best_distance = 0.0;
  for (std::int64_t dy = -1; dy <= 1; ++dy) {
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      auto it = buckets_.find(bucket_key(bx + dx, by + dy));
      if (it == buckets_.end()) continue;
      for (std::size_t i : it->second) {
        const double d = distance(entries_[i].center, center);
        if (d > 1.0) continue;
        if (!best || d < best_distance || (d == best_distance && i < best_index)) {
          best = &entries_[i];
          best_index = i;
          best_distance = d;
        }
      }
    }
  }
  if (!best) throw PredictorMiss(center);
  return *best;
}

Heatmap FilePredictor::predict(const PatchWindow& window, std::optional<ClassLabel>) const {
  return file_predict(store_, window);
}

Heatmap file_predict(const HeatmapStore& store, const PatchWindow& window) {
  return store.lookup(to_point(window.center)).heatmap;
}

Heatmap RecordingPredictor::predict(const PatchWindow& window, std::optional<ClassLabel> cls) const {
  Heatmap h = inner_.predict(window, cls);
  std::lock_guard lock(mutex_);
  recorded_.push_back({to_point(window.center), {}, h});
  return h;
}

HeatmapStore RecordingPredictor::to_store() const {
  std::lock_guard lock(mutex_);
  return HeatmapStore(recorded_);
}

// ---------------------------------------------------------------------------
// Peaks

PeakSet pick_peaks(const Grid<double>& grid, double threshold, int radius, const Grid<std::uint8_t>* allowed) {
  struct Cell {
    double value;
    int x, y;
  };
  std::vector<Cell> cells;
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      if (allowed && !(*allowed)(x, y)) continue;
      const double v = grid(x, y);
      if (v >= threshold) cells.push_back({v, x, y});
    }
  }
  // Visiting cells in this order and skipping suppressed ones is the same as
  // repeatedly taking the global maximum of the unsuppressed cells.
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  Grid<std::uint8_t> suppressed(grid.width(), grid.height());
  PeakSet out;
  for (const Cell& c : cells) {
    if (suppressed(c.x, c.y)) continue;
    out.peaks.push_back({c.x, c.y, c.value});
    for (int y = std::max(0, c.y - radius); y <= std::min(grid.height() - 1, c.y + radius); ++y) {
      for (int x = std::max(0, c.x - radius); x <= std::min(grid.width() - 1, c.x + radius); ++x) suppressed(x, y) = 1;
    }
  }
  return out;
}

PeakSet extract_peaks(const Heatmap& heatmap, double threshold, int nms_radius) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw InvariantError("peak threshold must lie in (0, 1]");
  if (nms_radius < 1) throw InvariantError("NMS radius must be at least 1");
  return pick_peaks(heatmap, threshold, nms_radius);
}

}  // namespace topotrace
