#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "topotrace/geometry.hpp"
#include "topotrace/grid.hpp"
#include "topotrace/netgraph.hpp"

namespace topotrace {

inline constexpr double kDefaultTolerance = 2.0;

struct Matching {
  std::vector<std::pair<Pixel, Pixel>> pairs;  // (pred, gt)
  std::vector<Pixel> unmatched_pred;
  std::vector<Pixel> unmatched_gt;
  double tolerance = kDefaultTolerance;
};

/// Greedy one-to-one matching of on-pixels within Euclidean distance d.
/// Candidate pairs are taken by increasing distance; equal distances are
/// ordered by the smaller endpoint (row-major), then the larger, then the
/// pair whose pred pixel is the smaller one. The key only depends on the
/// unordered pixel pair, so swapping pred and gt mirrors the result.
Matching match_skeletons(const SkeletonRaster& pred, const SkeletonRaster& gt, double tolerance = kDefaultTolerance);

struct PrecisionRecall {
  double P = 0.0;
  double R = 0.0;
  double F1R = 0.0;
};

/// Empty prediction gives P = 1. Throws when the ground truth is empty.
PrecisionRecall precision_recall(const Matching& m);

/// 2ab / (a + b), 0 when both are 0.
double f_measure(double a, double b);

/// Component connectivity: for every 8-connected GT component, the largest
/// share of its pixels whose partners fall in one predicted component,
/// weighted by component size.
double connectivity(const Matching& m, const SkeletonRaster& pred, const SkeletonRaster& gt);

struct EvalReport {
  double P = 0.0;
  double R = 0.0;
  double F1R = 0.0;
  double C = 0.0;
  double F1C = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double tolerance_px = kDefaultTolerance;
};

EvalReport evaluate(const SkeletonRaster& pred, const SkeletonRaster& gt, double tolerance = kDefaultTolerance);
EvalReport evaluate(const NetworkGraph& pred, const NetworkGraph& gt, double tolerance = kDefaultTolerance,
                    std::optional<ClassLabel> class_filter = std::nullopt);

std::string report_to_json(const EvalReport& report);

// ---------------------------------------------------------------------------
// Components and thinning

struct Components {
  Grid<int> labels;  // -1 on background
  int count = 0;
  std::vector<std::size_t> sizes;
};

/// 8-connected labelling; labels are assigned in row-major order of each
/// component's first pixel.
Components label_components(const SkeletonRaster& raster);

/// Two-subiteration thinning. Each subiteration marks candidates on the
/// image as it stood, then removes them in raster order, rechecking each one
/// on the current image. A third pass per iteration removes corners of
/// 4-connected staircases. A pixel is removed only if it is 8-simple, so
/// components and holes are preserved; iterates to a fixed point, hence
/// idempotent.
SkeletonRaster skeletonize(const SkeletonRaster& binary);

/// On where conf >= level / 255.
SkeletonRaster binarize(const ConfidenceMap& conf, int level);

struct BaselineResult {
  SkeletonRaster binary;
  SkeletonRaster skeleton;
  EvalReport report;
};

BaselineResult baseline_eval(const ConfidenceMap& conf, int level, const NetworkGraph& gt,
                             double tolerance = kDefaultTolerance, std::optional<ClassLabel> class_filter = std::nullopt);

// ---------------------------------------------------------------------------
// Patch-level detection curves

inline constexpr double kPatchMatchRadius = 3.0;

struct CurvePoint {
  double threshold = 0.0;
  double P = 0.0;
  double R = 0.0;
  double F = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct PrCurve {
  std::vector<CurvePoint> points;
  std::size_t best = 0;  // index of the largest F; first one on ties
};

/// Counts one-to-one matches (greedy by distance) between detections and
/// points within `radius`.
std::size_t match_points(std::span<const Point> detections, std::span<const Point> truth, double radius);

PrCurve patch_pr_curve(std::span<const Heatmap> heatmaps, std::span<const std::vector<Point>> gt_points,
                       double radius, std::span<const double> thresholds, int nms_radius = 3);

/// One "threshold P R F" line per threshold.
std::string format_curve(const PrCurve& curve);

// ---------------------------------------------------------------------------
// Overlay

/// RGB buffer: matched pixels green, false positives blue, false negatives red.
std::vector<std::uint8_t> overlay_rgb(const Matching& m, int width, int height);

// ---------------------------------------------------------------------------
// Published reference rows (percent). Absolute values need the original
// trained models; kept as fixtures for the formula checks only.

struct PublishedRow {
  const char* dataset;
  const char* method;
  double F1R, P, R, C, F1C;
};

std::span<const PublishedRow> published_rows();

}  // namespace topotrace
