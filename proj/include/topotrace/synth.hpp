#pragma once

#include <cstdint>
#include <optional>

#include "topotrace/grid.hpp"
#include "topotrace/netgraph.hpp"

namespace topotrace {

enum class SynthKind { tree, grid };

struct SynthParams {
  SynthKind kind = SynthKind::tree;
  int width = 256;
  int height = 256;
  int branches = 6;              // tree: child edges per tree; grid: unused
  double branch_length_min = 40;  // tree: edge length range; grid: lattice spacing range
  double branch_length_max = 80;
  double branch_angle_jitter = 40;  // degrees
  double min_separation = 8;
  int trees = 1;                      // tree kind only
  std::optional<double> class_mix;    // artery fraction of the trees; unset leaves edges unlabeled
  double deletion_rate = 0.15;        // grid kind only
  std::uint64_t rng_seed = 1;

  void validate() const;
};

/// Random branching trees (vessel-like) or a perturbed lattice with missing
/// edges (road-like). Edges that do not share a vertex stay at least
/// min_separation apart; edges sharing a vertex keep that distance once
/// they are 2 * min_separation away from it. Throws Error when placement
/// keeps failing.
NetworkGraph generate_network(const SynthParams& params);

/// 1 on rasterized centerline pixels, falling linearly to 0 at
/// `line_width` px from them, plus clamped Gaussian noise.
ConfidenceMap render_confidence(const NetworkGraph& graph, double line_width, double noise_sigma = 0.0,
                                std::uint64_t rng_seed = 0);

}  // namespace topotrace
