#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "topotrace/grid.hpp"
#include "topotrace/netgraph.hpp"
#include "topotrace/predictor.hpp"

namespace topotrace {

enum class FrontierOrder { fifo, lifo };

struct TraceParams {
  int patch_size = 64;
  int square_side = 58;
  double theta = 0.5;            // peak threshold on predictor heatmaps
  int nms_radius = 3;
  int visit_radius = 3;          // Chebyshev radius of the visited ball
  double seed_threshold = 0.5;   // for re-seeding from a confidence map
  int seed_min_dist = 16;
  std::size_t max_iterations = 0;   // 0: 50 * width * height / patch_size^2
  std::size_t snapshot_every = 0;   // 0: no snapshots
  FrontierOrder order = FrontierOrder::fifo;
  std::optional<ClassLabel> trace_class;  // class passed to the predictor; also labels output edges
  ClassLabel edge_label = ClassLabel::unlabeled;  // label when trace_class is unset

  void validate() const;
};

struct TraceResult {
  NetworkGraph graph;
  std::vector<SkeletonRaster> snapshots;
  std::size_t iterations = 0;
  std::size_t queries = 0;
  std::size_t reseed_rounds = 0;
};

/// Greedy maxima of the confidence map at or above `seed_threshold`, each
/// suppressing its Chebyshev ball of radius `min_dist`.
std::vector<Pixel> select_seeds(const ConfidenceMap& conf, double seed_threshold, int min_dist,
                                const Grid<std::uint8_t>* allowed = nullptr);

inline constexpr double kLinkEpsilon = 1e-3;

/// In-patch geometry between a center and an accepted peak. Without a
/// confidence map this is the straight segment; with one it is the cheapest
/// 8-connected pixel path inside the window (grown to contain both ends),
/// paying (1 - conf) for every entered pixel plus kLinkEpsilon per unit of
/// step length. Exact cost ties go to the path hugging the straight segment.
/// The returned polyline keeps only the pixels where the step direction
/// changes.
std::vector<Point> link_path(Pixel center, Pixel peak, const ConfidenceMap* conf, const PatchWindow& window);

/// Iterative delineation: pops frontier points, queries the predictor on the
/// window around each, links the point to every accepted peak and schedules
/// unseen peaks as new centers. With a confidence map, exhausted frontiers
/// are re-seeded from confident pixels that are neither visited nor near
/// traced geometry, until no such seeds remain.
TraceResult trace(const Predictor& predictor, const ConfidenceMap* conf, std::span<const Pixel> seeds,
                  const TraceParams& params, int width, int height);

/// Two class-constrained runs (artery, then vein), seeded from their own
/// confidence maps; the union of both traced graphs.
NetworkGraph trace_av(const Predictor& predictor_av, const ConfidenceMap& conf_artery, const ConfidenceMap& conf_vein,
                      const TraceParams& params);

/// Degree != 2 vertices (terminals and junctions) in id order, or the first
/// vertex when every vertex has degree 2.
std::vector<Pixel> seeds_from_graph(const NetworkGraph& graph);

}  // namespace topotrace
