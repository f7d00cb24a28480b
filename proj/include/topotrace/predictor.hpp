#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "topotrace/grid.hpp"
#include "topotrace/netgraph.hpp"
#include "topotrace/patchgt.hpp"

namespace topotrace {

/// Local connectivity predictor: given a patch window it returns a heatmap of
/// side `window.patch_size` whose peaks mark border points connected to the
/// window's center. Implementations must be deterministic and safe to call
/// concurrently.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Heatmap predict(const PatchWindow& window, std::optional<ClassLabel> cls) const = 0;
};

/// Ground-truth stand-in for a trained patch model.
///
/// In connectivity-av mode a requested class that differs from the class of
/// the edge under the center yields an all-zero heatmap.
/// Output values are quantized to the 16-bit heatmap file lattice.
class OraclePredictor : public Predictor {
 public:
  OraclePredictor(const NetworkGraph& graph, GtMode mode, double sigma = kDefaultSigma);

  Heatmap predict(const PatchWindow& window, std::optional<ClassLabel> cls) const override;

  /// The patch-local peak positions predict() renders.
  std::vector<Point> peak_points(const PatchWindow& window, std::optional<ClassLabel> cls) const;

  double sigma() const { return sigma_; }

 private:
  const NetworkGraph& graph_;
  GtMode mode_;
  double sigma_;
};

Heatmap oracle_predict(const NetworkGraph& graph, const PatchWindow& window, GtMode mode,
                       double sigma = kDefaultSigma);

/// Oracle with randomly dropped and displaced peaks. Randomness is derived
/// from (seed, window center) only.
class CorruptOracle : public Predictor {
 public:
  CorruptOracle(const OraclePredictor& inner, double drop_rate, int jitter, std::uint64_t rng_seed);

  Heatmap predict(const PatchWindow& window, std::optional<ClassLabel> cls) const override;
  std::vector<Point> peak_points(const PatchWindow& window, std::optional<ClassLabel> cls) const;

 private:
  const OraclePredictor& inner_;
  double drop_rate_;
  int jitter_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// File-backed heatmaps

struct StoreEntry {
  Point center;
  std::string relative_path;
  Heatmap heatmap;
};

/// A directory holding manifest.txt ("center_x center_y relative/path.pgm"
/// per line) and 16-bit P5 heatmaps. This is where externally computed
/// patch-model outputs plug in.
class HeatmapStore {
 public:
  HeatmapStore() = default;
  explicit HeatmapStore(std::vector<StoreEntry> entries);

  static HeatmapStore load(const std::filesystem::path& directory);
  void save(const std::filesystem::path& directory) const;

  const std::vector<StoreEntry>& entries() const { return entries_; }

  /// Nearest entry within 1 px (Euclidean); ties go to the earlier manifest
  /// line. Throws PredictorMiss otherwise.
  const StoreEntry& lookup(Point center) const;

 private:
  std::vector<StoreEntry> entries_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets_;
};

class FilePredictor : public Predictor {
 public:
  explicit FilePredictor(const HeatmapStore& store) : store_(store) {}

  Heatmap predict(const PatchWindow& window, std::optional<ClassLabel> cls) const override;

 private:
  const HeatmapStore& store_;
};

Heatmap file_predict(const HeatmapStore& store, const PatchWindow& window);

/// Forwards to an inner predictor and keeps every (center, heatmap) pair, in
/// call order, so a run can be replayed through a HeatmapStore.
class RecordingPredictor : public Predictor {
 public:
  explicit RecordingPredictor(const Predictor& inner) : inner_(inner) {}

  Heatmap predict(const PatchWindow& window, std::optional<ClassLabel> cls) const override;
  HeatmapStore to_store() const;

 private:
  const Predictor& inner_;
  mutable std::mutex mutex_;
  mutable std::vector<StoreEntry> recorded_;
};

// ---------------------------------------------------------------------------
// Peak extraction

struct Peak {
  int x = 0;
  int y = 0;
  double score = 0.0;

  friend bool operator==(const Peak&, const Peak&) = default;
};

struct PeakSet {
  std::vector<Peak> peaks;  // emission order: decreasing score, ties row-major
};

/// Greedy non-maximum suppression over any scalar grid: repeatedly emit the
/// largest remaining value >= threshold (ties: smaller y, then smaller x) and
/// suppress its Chebyshev ball of radius `radius`. `allowed`, when given,
/// masks out cells that may never be picked.
PeakSet pick_peaks(const Grid<double>& grid, double threshold, int radius, const Grid<std::uint8_t>* allowed = nullptr);

PeakSet extract_peaks(const Heatmap& heatmap, double threshold, int nms_radius = 3);

}  // namespace topotrace
