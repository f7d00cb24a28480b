#include "topotrace/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <iomanip>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "topotrace/errors.hpp"
#include "topotrace/predictor.hpp"

namespace topotrace {

namespace {

std::vector<Pixel> on_pixels(const SkeletonRaster& r) {
  std::vector<Pixel> out;
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) {
      if (r(x, y)) out.push_back({x, y});
    }
  }
  return out;
}

void require_same_shape(const SkeletonRaster& pred, const SkeletonRaster& gt) {
  if (!pred.same_shape(gt)) {
    throw DimensionMismatch("prediction is " + std::to_string(pred.width()) + "x" + std::to_string(pred.height()) +
                            ", ground truth is " + std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Matching

Matching match_skeletons(const SkeletonRaster& pred, const SkeletonRaster& gt, double tolerance) {
  require_same_shape(pred, gt);
  if (!(tolerance >= 0.0)) throw InvariantError("tolerance must be non-negative");

  struct Candidate {
    int d2;
    Pixel lo, hi;
    bool pred_is_lo;
    Pixel p, g;
  };
  const int r = static_cast<int>(std::floor(tolerance));
  const double tol2 = tolerance * tolerance;
  std::vector<Candidate> candidates;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!pred(x, y)) continue;
      const Pixel p{x, y};
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int d2 = dx * dx + dy * dy;
          if (d2 > tol2) continue;
          const Pixel g{x + dx, y + dy};
          if (!gt.contains(g) || !gt[g]) continue;
          const bool pred_lo = !row_major_less(g, p);
          candidates.push_back({d2, pred_lo ? p : g, pred_lo ? g : p, pred_lo, p, g});
        }
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.lo != b.lo) return row_major_less(a.lo, b.lo);
    if (a.hi != b.hi) return row_major_less(a.hi, b.hi);
    return a.pred_is_lo && !b.pred_is_lo;
  });

  Matching m;
  m.tolerance = tolerance;
  Grid<std::uint8_t> used_pred(pred.width(), pred.height());
  Grid<std::uint8_t> used_gt(gt.width(), gt.height());
  for (const Candidate& c : candidates) {
    if (used_pred[c.p] || used_gt[c.g]) continue;
    used_pred[c.p] = used_gt[c.g] = 1;
    m.pairs.emplace_back(c.p, c.g);
  }
  for (Pixel p : on_pixels(pred)) {
    if (!used_pred[p]) m.unmatched_pred.push_back(p);
  }
  for (Pixel g : on_pixels(gt)) {
    if (!used_gt[g]) m.unmatched_gt.push_back(g);
  }
  return m;
}

double f_measure(double a, double b) {
  if (!(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0)) throw InvariantError("F-measure inputs must lie in [0, 1]");
  if (a + b == 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

PrecisionRecall precision_recall(const Matching& m) {
  const double tp = static_cast<double>(m.pairs.size());
  const double n_pred = tp + static_cast<double>(m.unmatched_pred.size());
  const double n_gt = tp + static_cast<double>(m.unmatched_gt.size());
  if (n_gt == 0.0) throw InvariantError("recall undefined: ground truth is empty");
  PrecisionRecall pr;
  pr.P = n_pred == 0.0 ? 1.0 : tp / n_pred;
  pr.R = tp / n_gt;
  pr.F1R = f_measure(pr.P, pr.R);
  return pr;
}

double connectivity(const Matching& m, const SkeletonRaster& pred, const SkeletonRaster& gt) {
  require_same_shape(pred, gt);
  const Components gc = label_components(gt);
  if (gc.count == 0) throw InvariantError("connectivity undefined: ground truth is empty");
  const Components pc = label_components(pred);

  // Per GT component, count matched pixels per predicted component.
  std::vector<std::vector<std::size_t>> groups(gc.count);
  for (const auto& [p, g] : m.pairs) {
    const int gl = gc.labels[g];
    const int pl = pc.labels[p];
    if (gl < 0 || pl < 0) throw InvariantError("matching does not belong to these rasters");
    auto& bucket = groups[gl];
    if (bucket.empty()) bucket.assign(pc.count, 0);
    ++bucket[pl];
  }
  double numerator = 0.0;
  double total = 0.0;
  for (int i = 0; i < gc.count; ++i) {
    const auto& bucket = groups[i];
    if (!bucket.empty()) numerator += static_cast<double>(*std::max_element(bucket.begin(), bucket.end()));
    total += static_cast<double>(gc.sizes[i]);
  }
  return numerator / total;
}

EvalReport evaluate(const SkeletonRaster& pred, const SkeletonRaster& gt, double tolerance) {
  const Matching m = match_skeletons(pred, gt, tolerance);
  const PrecisionRecall pr = precision_recall(m);
  EvalReport r;
  r.P = pr.P;
  r.R = pr.R;
  r.F1R = pr.F1R;
  r.C = connectivity(m, pred, gt);
  r.F1C = f_measure(r.P, r.C);
  r.tp = m.pairs.size();
  r.fp = m.unmatched_pred.size();
  r.fn = m.unmatched_gt.size();
  r.tolerance_px = tolerance;
  return r;
}

EvalReport evaluate(const NetworkGraph& pred, const NetworkGraph& gt, double tolerance,
                    std::optional<ClassLabel> class_filter) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw DimensionMismatch("prediction is " + std::to_string(pred.width()) + "x" + std::to_string(pred.height()) +
                            ", ground truth is " + std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
  }
  return evaluate(rasterize(pred, class_filter), rasterize(gt, class_filter), tolerance);
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["P"] = r.P;
  j["R"] = r.R;
  j["F1R"] = r.F1R;
  j["C"] = r.C;
  j["F1C"] = r.F1C;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["tolerance_px"] = r.tolerance_px;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Components

Components label_components(const SkeletonRaster& raster) {
  Components c;
  c.labels = Grid<int>(raster.width(), raster.height(), -1);
  std::deque<Pixel> queue;
  for (int y = 0; y < raster.height(); ++y) {
    for (int x = 0; x < raster.width(); ++x) {
      if (!raster(x, y) || c.labels(x, y) >= 0) continue;
      const int label = c.count++;
      std::size_t size = 0;
      c.labels(x, y) = label;
      queue.push_back({x, y});
      while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        ++size;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const Pixel q{p.x + dx, p.y + dy};
            if (!raster.contains(q) || !raster[q] || c.labels[q] >= 0) continue;
            c.labels[q] = label;
            queue.push_back(q);
          }
        }
      }
      c.sizes.push_back(size);
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Thinning

namespace {

// Neighbours clockwise from north: N, NE, E, SE, S, SW, W, NW.
constexpr std::array<Pixel, 8> kRing{{{0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}}};

std::array<int, 8> ring(const SkeletonRaster& r, int x, int y) {
  std::array<int, 8> n{};
  for (int k = 0; k < 8; ++k) {
    const int xx = x + kRing[k].x;
    const int yy = y + kRing[k].y;
    n[k] = r.contains(xx, yy) && r(xx, yy) ? 1 : 0;
  }
  return n;
}

// 8-connectivity number over the ring; the pixel is simple iff it is 1.
// Summed over the 4-neighbours (even ring positions).
int connectivity_number(const std::array<int, 8>& n) {
  int total = 0;
  for (int k = 0; k < 8; k += 2) {
    const int a = 1 - n[k];
    const int b = 1 - n[(k + 1) % 8];
    const int c = 1 - n[(k + 2) % 8];
    total += a - a * b * c;
  }
  return total;
}

bool deletable(const std::array<int, 8>& n, int pass) {
  int b = 0;
  int a = 0;
  for (int k = 0; k < 8; ++k) {
    b += n[k];
    a += n[k] == 0 && n[(k + 1) % 8] == 1;
  }
  if (b < 2 || b > 6 || a != 1) return false;
  const int north = n[0], east = n[2], south = n[4], west = n[6];
  if (pass == 0) {
    if (north * east * south != 0 || east * south * west != 0) return false;
  } else {
    if (north * east * west != 0 || north * south * west != 0) return false;
  }
  return connectivity_number(n) == 1;
}

// Corner of a 4-connected staircase: two orthogonal neighbours set with the
// diagonal between them clear. Such pixels survive the passes above although
// the skeleton stays 8-connected without them.
bool staircase_corner(const std::array<int, 8>& n) {
  int b = 0;
  for (int v : n) b += v;
  if (b < 2) return false;
  bool corner = false;
  for (int k = 0; k < 8; k += 2) corner = corner || (n[k] && n[(k + 2) % 8] && !n[k + 1]);
  return corner && connectivity_number(n) == 1;
}

}  // namespace

SkeletonRaster skeletonize(const SkeletonRaster& binary) {
  SkeletonRaster out(binary.width(), binary.height());
  auto dst = out.values();
  auto src = binary.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 1 : 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      // Candidates come from the image as it stood before this subiteration;
      // each one is rechecked against the current image before removal.
      std::vector<Pixel> candidates;
      for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
          if (out(x, y) && deletable(ring(out, x, y), pass)) candidates.push_back({x, y});
        }
      }
      for (const Pixel& p : candidates) {
        if (deletable(ring(out, p.x, p.y), pass)) {
          out(p.x, p.y) = 0;
          changed = true;
        }
      }
    }
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) {
        if (out(x, y) && staircase_corner(ring(out, x, y))) {
          out(x, y) = 0;
          changed = true;
        }
      }
    }
  }
  return out;
}

SkeletonRaster binarize(const ConfidenceMap& conf, int level) {
  if (level < 0 || level > 255) throw InvariantError("threshold level must lie in [0, 255]");
  SkeletonRaster out(conf.width(), conf.height());
  auto dst = out.values();
  auto src = conf.values();
  // Compared on the 8-bit scale with a little slack so that maps loaded
  // from 8-bit files binarize exactly at their integer levels.
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * 255.0 >= level - 1e-9;
  return out;
}

BaselineResult baseline_eval(const ConfidenceMap& conf, int level, const NetworkGraph& gt, double tolerance,
                             std::optional<ClassLabel> class_filter) {
  if (conf.width() != gt.width() || conf.height() != gt.height()) {
    throw DimensionMismatch("confidence map is " + std::to_string(conf.width()) + "x" + std::to_string(conf.height()) +
                            ", ground truth is " + std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
  }
  BaselineResult out;
  out.binary = binarize(conf, level);
  out.skeleton = skeletonize(out.binary);
  out.report = evaluate(out.skeleton, rasterize(gt, class_filter), tolerance);
  return out;
}

// ---------------------------------------------------------------------------
// Patch-level curves

std::size_t match_points(std::span<const Point> detections, std::span<const Point> truth, double radius) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const double d = distance(detections[i], truth[j]);
      if (d <= radius) candidates.emplace_back(d, i, j);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<char> used_d(detections.size()), used_t(truth.size());
  std::size_t matched = 0;
  for (const auto& [d, i, j] : candidates) {
    if (used_d[i] || used_t[j]) continue;
    used_d[i] = used_t[j] = 1;
    ++matched;
  }
  return matched;
}

PrCurve patch_pr_curve(std::span<const Heatmap> heatmaps, std::span<const std::vector<Point>> gt_points,
                       double radius, std::span<const double> thresholds, int nms_radius) {
  if (heatmaps.size() != gt_points.size()) {
    throw InvariantError(std::to_string(heatmaps.size()) + " heatmaps but " + std::to_string(gt_points.size()) +
                         " ground-truth point sets");
  }
  PrCurve curve;
  for (double t : thresholds) {
    CurvePoint cp;
    cp.threshold = t;
    for (std::size_t i = 0; i < heatmaps.size(); ++i) {
      std::vector<Point> det;
      for (const Peak& p : extract_peaks(heatmaps[i], t, nms_radius).peaks) det.push_back({double(p.x), double(p.y)});
      const std::size_t tp = match_points(det, gt_points[i], radius);
      cp.tp += tp;
      cp.fp += det.size() - tp;
      cp.fn += gt_points[i].size() - tp;
    }
    cp.P = cp.tp + cp.fp == 0 ? 1.0 : double(cp.tp) / double(cp.tp + cp.fp);
    cp.R = cp.tp + cp.fn == 0 ? 1.0 : double(cp.tp) / double(cp.tp + cp.fn);
    cp.F = f_measure(cp.P, cp.R);
    if (curve.points.empty() || cp.F > curve.points[curve.best].F) curve.best = curve.points.size();
    curve.points.push_back(cp);
  }
  return curve;
}

std::string format_curve(const PrCurve& curve) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  for (const CurvePoint& p : curve.points) os << p.threshold << ' ' << p.P << ' ' << p.R << ' ' << p.F << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Overlay

std::vector<std::uint8_t> overlay_rgb(const Matching& m, int width, int height) {
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3, 0);
  auto paint = [&](Pixel p, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const std::size_t i = (static_cast<std::size_t>(p.y) * width + p.x) * 3;
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
  };
  for (Pixel p : m.unmatched_gt) paint(p, 255, 0, 0);
  for (Pixel p : m.unmatched_pred) paint(p, 0, 0, 255);
  for (const auto& [p, g] : m.pairs) paint(p, 0, 255, 0);
  return rgb;
}

// ---------------------------------------------------------------------------
// Fixtures

std::span<const PublishedRow> published_rows() {
  static constexpr PublishedRow rows[] = {
      {"vessels", "DRIU-224", 90.4, 97.3, 84.7, 67.7, 79.8},
      {"vessels", "DRIU-200", 92.0, 93.8, 90.6, 74.0, 82.7},
      {"vessels", "DRIU-170", 91.3, 89.9, 93.1, 78.3, 83.7},
      {"vessels", "Iterative", 89.8, 86.1, 94.1, 84.9, 85.5},
      {"vessels", "GT skeleton", 97.4, 95.6, 99.3, 92.6, 94.1},
      {"vessels", "Random", 44.9, 44.2, 45.9, 21.8, 29.2},
      {"arteries", "VGG-220", 76.1, 72.9, 80.7, 52.4, 61.0},
      {"arteries", "VGG-190", 74.1, 64.5, 88.2, 65.4, 64.9},
      {"arteries", "Iterative", 78.0, 81.4, 75.3, 63.0, 71.0},
      {"veins", "VGG-230", 74.2, 70.8, 79.1, 42.2, 52.9},
      {"veins", "VGG-180", 70.2, 57.4, 91.3, 66.1, 61.5},
      {"veins", "Iterative", 75.4, 72.0, 79.6, 61.2, 66.2},
      {"roads", "VGG-150", 64.1, 49.2, 94.7, 49.4, 49.3},
      {"roads", "VGG-175", 72.0, 61.5, 88.6, 30.7, 41.0},
      {"roads", "VGG-200", 72.4, 75.8, 70.7, 11.0, 19.2},
      {"roads", "Iterative-20", 78.2, 72.0, 87.0, 73.4, 72.7},
      {"roads", "Iterative-25", 80.9, 79.1, 83.9, 69.9, 74.2},
      {"roads", "Iterative-30", 81.6, 83.5, 80.8, 67.1, 74.4},
  };
  return rows;
}

}  // namespace topotrace
