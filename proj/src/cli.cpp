#include "topotrace/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "topotrace/errors.hpp"
#include "topotrace/eval.hpp"
#include "topotrace/io.hpp"
#include "topotrace/netgraph.hpp"
#include "topotrace/patchgt.hpp"
#include "topotrace/pgm.hpp"
#include "topotrace/predictor.hpp"
#include "topotrace/synth.hpp"
#include "topotrace/tracer.hpp"

#ifndef TOPOTRACE_VERSION
#define TOPOTRACE_VERSION "0.0.0"
#endif

namespace topotrace::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string numbered(const char* stem, std::size_t i, int digits, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%0*zu%s", stem, digits, i, ext);
  return buf;
}

/// Runs fn(0..n-1) on up to `jobs` threads. The first failure by index is
/// rethrown so diagnostics do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto count = static_cast<std::size_t>(std::max(1, jobs));
  if (count == 1 || n < 2) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(count, n); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool is_graph_path(const fs::path& p) { return p.extension() == ".json"; }

SkeletonRaster load_skeleton(const fs::path& p, std::optional<ClassLabel> cls) {
  if (is_graph_path(p)) return rasterize(load_graph(p), cls);
  return load_raster(p);
}

void emit(const std::optional<fs::path>& out_path, const std::string& text, std::ostream& out) {
  if (out_path) {
    write_file_atomic(*out_path, text);
  } else {
    out << text;
  }
}

std::optional<ClassLabel> label_option(const std::string& text) {
  if (text.empty()) return std::nullopt;
  auto l = parse_label(text);
  if (!l) throw UsageError("unknown class label '" + text + "'");
  return l;
}

GtMode mode_option(const std::string& text) {
  auto m = parse_gt_mode(text);
  if (!m) throw UsageError("unknown mode '" + text + "'");
  return *m;
}

Pixel parse_seed(const std::string& text) {
  int x = 0, y = 0;
  char sep = 0;
  std::istringstream is(text);
  if (!(is >> x >> sep >> y) || sep != ',' || !is.eof()) throw UsageError("seed must look like X,Y, got '" + text + "'");
  return {x, y};
}

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::istringstream is(text);
  for (std::string tok; std::getline(is, tok, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::logic_error&) {
      throw UsageError("bad threshold '" + tok + "'");
    }
  }
  if (out.empty()) throw UsageError("no thresholds given");
  return out;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  std::string kind = "tree";
  SynthParams params;
  double class_mix = -1;
  std::size_t count = 1;
  double line_width = 2.0;
  double noise = 0.0;
  fs::path out_dir;
  int jobs = 1;
};

void add_synth(CLI::App& app, SynthOptions& o) {
  auto* c = app.add_subcommand("synth", "Generate synthetic networks and confidence maps");
  c->add_option("--kind", o.kind, "tree or grid")->check(CLI::IsMember({"tree", "grid"}))->capture_default_str();
  c->add_option("--width", o.params.width)->capture_default_str();
  c->add_option("--height", o.params.height)->capture_default_str();
  c->add_option("--branches", o.params.branches)->capture_default_str();
  c->add_option("--length-min", o.params.branch_length_min)->capture_default_str();
  c->add_option("--length-max", o.params.branch_length_max)->capture_default_str();
  c->add_option("--jitter", o.params.branch_angle_jitter, "Branch angle jitter in degrees")->capture_default_str();
  c->add_option("--min-sep", o.params.min_separation)->capture_default_str();
  c->add_option("--trees", o.params.trees)->capture_default_str();
  c->add_option("--class-mix", o.class_mix, "Artery fraction; omit for unlabeled trees");
  c->add_option("--deletion-rate", o.params.deletion_rate)->capture_default_str();
  c->add_option("--seed", o.params.rng_seed)->capture_default_str();
  c->add_option("--count", o.count)->capture_default_str();
  c->add_option("--line-width", o.line_width)->capture_default_str();
  c->add_option("--noise", o.noise)->capture_default_str();
  c->add_option("--out-dir", o.out_dir)->required();
  c->add_option("--jobs", o.jobs)->check(CLI::PositiveNumber)->capture_default_str();
}

int run_synth(const SynthOptions& o, std::ostream& out) {
  SynthParams base = o.params;
  base.kind = o.kind == "grid" ? SynthKind::grid : SynthKind::tree;
  if (o.class_mix >= 0) base.class_mix = o.class_mix;
  base.validate();
  fs::create_directories(o.out_dir);
  std::vector<std::string> lines(o.count);
  parallel_for(o.count, o.jobs, [&](std::size_t i) {
    SynthParams p = base;
    p.rng_seed = base.rng_seed + i;
    const NetworkGraph g = generate_network(p);
    const ConfidenceMap conf = render_confidence(g, o.line_width, o.noise, p.rng_seed ^ 0x9e3779b97f4a7c15ull);
    const std::string graph_name = numbered("graph", i, 4, ".json");
    const std::string conf_name = numbered("conf", i, 4, ".pgm");
    save_graph(o.out_dir / graph_name, g);
    save_confidence(o.out_dir / conf_name, conf);
    lines[i] = graph_name + " " + conf_name + "\n";
  });
  std::string manifest;
  for (const auto& l : lines) manifest += l;
  write_file_atomic(o.out_dir / "manifest.txt", manifest);
  out << "wrote " << o.count << " instance(s) to " << o.out_dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gen-gt

struct GenGtOptions {
  fs::path graph;
  std::string mode = "connectivity";
  std::size_t n = 50;
  int patch_size = 64;
  int square_side = 58;
  double sigma = kDefaultSigma;
  std::uint64_t seed = 1;
  fs::path out_dir;
  int jobs = 1;
};

void add_gen_gt(CLI::App& app, GenGtOptions& o) {
  auto* c = app.add_subcommand("gen-gt", "Sample patch windows and write ground-truth heatmaps");
  c->add_option("--graph", o.graph)->required()->check(CLI::ExistingFile);
  c->add_option("--mode", o.mode, "non-connectivity, connectivity or connectivity-av")->capture_default_str();
  c->add_option("--n", o.n, "Patches to sample")->capture_default_str();
  c->add_option("--patch-size", o.patch_size)->capture_default_str();
  c->add_option("--square-side", o.square_side)->capture_default_str();
  c->add_option("--sigma", o.sigma)->capture_default_str();
  c->add_option("--seed", o.seed)->capture_default_str();
  c->add_option("--out-dir", o.out_dir)->required();
  c->add_option("--jobs", o.jobs)->check(CLI::PositiveNumber)->capture_default_str();
}

int run_gen_gt(const GenGtOptions& o, std::ostream& out) {
  const GtMode mode = mode_option(o.mode);
  const NetworkGraph graph = load_graph(o.graph);
  if (mode == GtMode::connectivity_av) require_vessel_labels(graph);
  const auto windows = sample_training_patches(graph, o.n, o.patch_size, o.seed, o.square_side);
  fs::create_directories(o.out_dir);
  std::vector<std::string> lines(windows.size());
  parallel_for(windows.size(), o.jobs, [&](std::size_t i) {
    const auto pts = to_patch_coordinates(gt_points(graph, windows[i], mode), windows[i]);
    const std::string name = numbered("heatmap", i, 6, ".pgm");
    save_heatmap(o.out_dir / name, make_gt_heatmap(pts, o.patch_size, o.sigma));
    lines[i] = std::to_string(windows[i].center.x) + " " + std::to_string(windows[i].center.y) + " " +
               std::string(to_string(mode)) + " " + name + "\n";
  });
  std::string manifest;
  for (const auto& l : lines) manifest += l;
  write_file_atomic(o.out_dir / "manifest.txt", manifest);
  out << "wrote " << windows.size() << " heatmap(s) to " << o.out_dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// trace

struct TraceOptions {
  std::optional<fs::path> graph;
  std::string predictor = "oracle";
  std::string mode = "connectivity";
  double sigma = kDefaultSigma;
  double theta = 0.5;
  int theta_255 = -1;
  TraceParams params;
  std::optional<fs::path> conf, conf_artery, conf_vein, heatmaps, record, snapshots;
  bool av = false;
  bool seed_from_graph = false;
  std::vector<std::string> seeds;
  std::string order = "fifo";
  std::string cls, edge_label;
  double drop_rate = 0.0;
  int jitter = 0;
  std::uint64_t rng_seed = 0;
  int width = 0, height = 0;
  fs::path out;
};

void add_trace(CLI::App& app, TraceOptions& o) {
  auto* c = app.add_subcommand("trace", "Iteratively delineate a network with a patch predictor");
  c->add_option("--graph", o.graph, "Ground-truth graph for the oracle predictors")->check(CLI::ExistingFile);
  c->add_option("--predictor", o.predictor, "oracle, corrupt or file")
      ->check(CLI::IsMember({"oracle", "corrupt", "file"}))
      ->capture_default_str();
  c->add_option("--mode", o.mode)->capture_default_str();
  c->add_option("--sigma", o.sigma)->capture_default_str();
  auto* theta = c->add_option("--theta", o.theta, "Peak threshold in (0, 1]")->capture_default_str();
  c->add_option("--theta-255", o.theta_255, "Peak threshold on the 8-bit scale")
      ->check(CLI::Range(1, 255))
      ->excludes(theta);
  c->add_option("--nms", o.params.nms_radius)->capture_default_str();
  c->add_option("--visit-radius", o.params.visit_radius)->capture_default_str();
  c->add_option("--patch-size", o.params.patch_size)->capture_default_str();
  c->add_option("--square-side", o.params.square_side)->capture_default_str();
  c->add_option("--conf", o.conf, "Confidence map for seeding and path linking")->check(CLI::ExistingFile);
  c->add_option("--conf-artery", o.conf_artery)->check(CLI::ExistingFile);
  c->add_option("--conf-vein", o.conf_vein)->check(CLI::ExistingFile);
  c->add_flag("--av", o.av, "Artery and vein runs from their own confidence maps");
  c->add_option("--heatmaps", o.heatmaps, "Heatmap store for --predictor file")->check(CLI::ExistingDirectory);
  c->add_option("--record", o.record, "Write every queried heatmap to this store directory");
  c->add_flag("--seed-from-graph", o.seed_from_graph, "Seed at terminals and junctions of --graph");
  c->add_option("--seed", o.seeds, "Seed pixel X,Y (repeatable)");
  c->add_option("--seed-threshold", o.params.seed_threshold)->capture_default_str();
  c->add_option("--seed-min-dist", o.params.seed_min_dist)->capture_default_str();
  c->add_option("--max-iterations", o.params.max_iterations, "0 picks a size-based default")->capture_default_str();
  c->add_option("--snapshot-every", o.params.snapshot_every)->capture_default_str();
  c->add_option("--snapshots", o.snapshots, "Directory for numbered snapshot rasters");
  c->add_option("--order", o.order)->check(CLI::IsMember({"fifo", "lifo"}))->capture_default_str();
  c->add_option("--class", o.cls, "Class passed to the predictor (artery or vein)");
  c->add_option("--edge-label", o.edge_label, "Label for traced edges without --class");
  c->add_option("--drop-rate", o.drop_rate)->capture_default_str();
  c->add_option("--jitter", o.jitter)->capture_default_str();
  c->add_option("--rng-seed", o.rng_seed)->capture_default_str();
  c->add_option("--width", o.width, "Image width when no graph or map gives it");
  c->add_option("--height", o.height);
  c->add_option("--out", o.out)->required();
}

int run_trace(TraceOptions o, std::ostream& out) {
  const GtMode mode = mode_option(o.mode);
  o.params.theta = o.theta_255 > 0 ? o.theta_255 / 255.0 : o.theta;
  o.params.order = o.order == "lifo" ? FrontierOrder::lifo : FrontierOrder::fifo;
  o.params.trace_class = label_option(o.cls);
  if (auto l = label_option(o.edge_label)) o.params.edge_label = *l;
  o.params.validate();
  if (o.predictor != "file" && !o.graph) throw UsageError("--predictor " + o.predictor + " needs --graph");
  if (o.predictor == "file" && !o.heatmaps) throw UsageError("--predictor file needs --heatmaps");
  if (o.seed_from_graph && !o.graph) throw UsageError("--seed-from-graph needs --graph");
  if (o.av && (!o.conf_artery || !o.conf_vein)) throw UsageError("--av needs --conf-artery and --conf-vein");

  std::optional<NetworkGraph> graph;
  if (o.graph) graph = load_graph(*o.graph);
  std::optional<OraclePredictor> oracle;
  std::optional<CorruptOracle> corrupt;
  std::optional<HeatmapStore> store;
  std::optional<FilePredictor> file;
  const Predictor* predictor = nullptr;
  if (o.predictor == "file") {
    store = HeatmapStore::load(*o.heatmaps);
    file.emplace(*store);
    predictor = &*file;
  } else {
    oracle.emplace(*graph, mode, o.sigma);
    predictor = &*oracle;
    if (o.predictor == "corrupt") {
      corrupt.emplace(*oracle, o.drop_rate, o.jitter, o.rng_seed);
      predictor = &*corrupt;
    }
  }
  std::optional<RecordingPredictor> recorder;
  if (o.record) {
    recorder.emplace(*predictor);
    predictor = &*recorder;
  }

  NetworkGraph result;
  std::string summary;
  if (o.av) {
    const ConfidenceMap ca = load_confidence(*o.conf_artery);
    const ConfidenceMap cv = load_confidence(*o.conf_vein);
    result = trace_av(*predictor, ca, cv, o.params);
  } else {
    std::optional<ConfidenceMap> conf;
    if (o.conf) conf = load_confidence(*o.conf);
    int w = o.width, h = o.height;
    if (conf) {
      w = conf->width();
      h = conf->height();
    } else if (graph) {
      w = graph->width();
      h = graph->height();
    }
    if (w <= 0 || h <= 0) throw UsageError("image size unknown: give --conf, --graph or --width/--height");
    if (graph && (graph->width() != w || graph->height() != h)) {
      throw DimensionMismatch("graph is " + std::to_string(graph->width()) + "x" + std::to_string(graph->height()) +
                              ", confidence map is " + std::to_string(w) + "x" + std::to_string(h));
    }
    std::vector<Pixel> seeds;
    for (const auto& s : o.seeds) seeds.push_back(parse_seed(s));
    if (o.seed_from_graph) {
      for (Pixel p : seeds_from_graph(*graph)) seeds.push_back(p);
    }
    if (seeds.empty() && conf) seeds = select_seeds(*conf, o.params.seed_threshold, o.params.seed_min_dist);
    if (seeds.empty()) throw UsageError("no seeds: give --seed, --seed-from-graph or --conf");
    TraceResult r = trace(*predictor, conf ? &*conf : nullptr, seeds, o.params, w, h);
    if (o.snapshots) {
      fs::create_directories(*o.snapshots);
      for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
        save_raster(*o.snapshots / numbered("snapshot", i, 4, ".pgm"), r.snapshots[i]);
      }
    }
    summary = " in " + std::to_string(r.iterations) + " iterations, " + std::to_string(r.queries) + " queries";
    result = std::move(r.graph);
  }
  save_graph(o.out, result);
  if (recorder) recorder->to_store().save(*o.record);
  out << "traced " << result.vertices().size() << " vertices, " << result.edges().size() << " edges" << summary
      << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// skeleton-baseline

struct BaselineOptions {
  fs::path conf, gt;
  int level = 128;
  double tolerance = kDefaultTolerance;
  std::string cls;
  std::optional<fs::path> out_skeleton, out;
};

void add_baseline(CLI::App& app, BaselineOptions& o) {
  auto* c = app.add_subcommand("skeleton-baseline", "Threshold a confidence map, thin it and evaluate");
  c->add_option("--conf", o.conf)->required()->check(CLI::ExistingFile);
  c->add_option("--gt", o.gt, "Ground-truth graph")->required()->check(CLI::ExistingFile);
  c->add_option("--level", o.level, "8-bit threshold")->check(CLI::Range(0, 255))->capture_default_str();
  c->add_option("--tolerance-px", o.tolerance)->capture_default_str();
  c->add_option("--class", o.cls, "Evaluate only GT edges of this class");
  c->add_option("--out-skeleton", o.out_skeleton);
  c->add_option("--out", o.out, "Report path (default: standard output)");
}

int run_baseline(const BaselineOptions& o, std::ostream& out) {
  const auto cls = label_option(o.cls);
  const ConfidenceMap conf = load_confidence(o.conf);
  const NetworkGraph gt = load_graph(o.gt);
  const BaselineResult r = baseline_eval(conf, o.level, gt, o.tolerance, cls);
  if (o.out_skeleton) save_raster(*o.out_skeleton, r.skeleton);
  emit(o.out, report_to_json(r.report), out);
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::optional<fs::path> pred, gt, batch, out, overlay;
  double tolerance = kDefaultTolerance;
  std::string cls;
  int jobs = 1;
};

void add_eval(CLI::App& app, EvalOptions& o) {
  auto* c = app.add_subcommand("eval", "Boundary precision/recall and connectivity of a prediction");
  auto* pred = c->add_option("--pred", o.pred, "Predicted graph (.json) or skeleton (.pgm)")->check(CLI::ExistingFile);
  auto* gt = c->add_option("--gt", o.gt, "Ground-truth graph (.json) or skeleton (.pgm)")->check(CLI::ExistingFile);
  auto* batch = c->add_option("--batch", o.batch, "File of \"pred gt\" lines; reports become a JSON array")
                    ->check(CLI::ExistingFile);
  batch->excludes(pred)->excludes(gt);
  c->add_option("--tolerance-px", o.tolerance)->capture_default_str();
  c->add_option("--class", o.cls, "Rasterize only edges of this class");
  c->add_option("--out", o.out, "Report path (default: standard output)");
  c->add_option("--overlay", o.overlay, "Write a P6 overlay: green matched, blue FP, red FN");
  c->add_option("--jobs", o.jobs)->check(CLI::PositiveNumber)->capture_default_str();
}

int run_eval(const EvalOptions& o, std::ostream& out) {
  const auto cls = label_option(o.cls);
  if (o.batch) {
    if (o.overlay) throw UsageError("--overlay is not available with --batch");
    std::istringstream lines(read_file(*o.batch));
    std::vector<std::pair<fs::path, fs::path>> items;
    const fs::path base = o.batch->parent_path();
    for (std::string line; std::getline(lines, line);) {
      std::istringstream fields(line);
      std::string a, b;
      if (!(fields >> a)) continue;
      if (a.front() == '#') continue;
      if (!(fields >> b)) throw ParseError(o.batch->string() + ": expected \"pred gt\"", items.size() + 1, 1);
      items.emplace_back(base / a, base / b);
    }
    for (const auto& [a, b] : items) {
      if (!fs::exists(a)) throw UsageError("missing file " + a.string());
      if (!fs::exists(b)) throw UsageError("missing file " + b.string());
    }
    std::vector<EvalReport> reports(items.size());
    parallel_for(items.size(), o.jobs, [&](std::size_t i) {
      reports[i] = evaluate(load_skeleton(items[i].first, cls), load_skeleton(items[i].second, cls), o.tolerance);
    });
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(nlohmann::ordered_json::parse(report_to_json(r)));
    emit(o.out, arr.dump(2) + "\n", out);
    return 0;
  }
  if (!o.pred || !o.gt) throw UsageError("eval needs --pred and --gt, or --batch");
  const SkeletonRaster pred = load_skeleton(*o.pred, cls);
  const SkeletonRaster gt = load_skeleton(*o.gt, cls);
  if (!pred.same_shape(gt)) {
    throw DimensionMismatch("prediction " + o.pred->string() + " is " + std::to_string(pred.width()) + "x" +
                            std::to_string(pred.height()) + ", ground truth " + o.gt->string() + " is " +
                            std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
  }
  const EvalReport report = evaluate(pred, gt, o.tolerance);
  if (o.overlay) {
    const Matching m = match_skeletons(pred, gt, o.tolerance);
    write_file_atomic(*o.overlay, encode_ppm(pred.width(), pred.height(), overlay_rgb(m, pred.width(), pred.height())));
  }
  emit(o.out, report_to_json(report), out);
  return 0;
}

// ---------------------------------------------------------------------------
// curve

struct CurveOptions {
  fs::path pred_dir, graph;
  std::string mode = "connectivity";
  int patch_size = 64;
  int square_side = 58;
  double radius = kPatchMatchRadius;
  std::string thresholds = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95";
  int nms = 3;
  std::optional<fs::path> out;
};

void add_curve(CLI::App& app, CurveOptions& o) {
  auto* c = app.add_subcommand("curve", "Patch-level detection precision/recall over thresholds");
  c->add_option("--pred-dir", o.pred_dir, "Heatmap store of predictions")->required()->check(CLI::ExistingDirectory);
  c->add_option("--graph", o.graph, "Ground-truth graph")->required()->check(CLI::ExistingFile);
  c->add_option("--mode", o.mode)->capture_default_str();
  c->add_option("--patch-size", o.patch_size)->capture_default_str();
  c->add_option("--square-side", o.square_side)->capture_default_str();
  c->add_option("--radius", o.radius, "Match radius in pixels")->capture_default_str();
  c->add_option("--thresholds", o.thresholds, "Comma-separated thresholds");
  c->add_option("--nms", o.nms)->capture_default_str();
  c->add_option("--out", o.out, "Curve path (default: standard output)");
}

int run_curve(const CurveOptions& o, std::ostream& out, std::ostream& err) {
  const GtMode mode = mode_option(o.mode);
  const auto thresholds = parse_thresholds(o.thresholds);
  const NetworkGraph graph = load_graph(o.graph);
  const HeatmapStore store = HeatmapStore::load(o.pred_dir);
  std::vector<Heatmap> heatmaps;
  std::vector<std::vector<Point>> truth;
  for (const StoreEntry& e : store.entries()) {
    const auto window =
        PatchWindow::clamped(to_pixel(e.center), o.patch_size, o.square_side, graph.width(), graph.height());
    if (!window) throw InvariantError("patch window does not fit the image");
    if (e.heatmap.side() != o.patch_size) {
      throw DimensionMismatch(e.relative_path + " is " + std::to_string(e.heatmap.side()) + " px, expected " +
                              std::to_string(o.patch_size));
    }
    heatmaps.push_back(e.heatmap);
    truth.push_back(to_patch_coordinates(gt_points(graph, *window, mode), *window));
  }
  const PrCurve curve = patch_pr_curve(heatmaps, truth, o.radius, thresholds, o.nms);
  emit(o.out, format_curve(curve), out);
  const CurvePoint& b = curve.points[curve.best];
  err << "best threshold " << b.threshold << ": P " << b.P << " R " << b.R << " F " << b.F << "\n";
  return 0;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

// CLI11 checks required options before it looks at leftovers, so a typo'd
// flag would otherwise be reported as a missing one.
std::optional<std::string> unknown_flag(const std::vector<std::string>& args, const CLI::App& app,
                                        const CLI::App* cmd) {
  for (const std::string& a : args) {
    if (a.size() < 2 || a[0] != '-') continue;
    if (std::isdigit(static_cast<unsigned char>(a[1])) || a[1] == '.') continue;  // negative number
    const std::string name = a.substr(0, a.find('='));
    if (app.get_option_no_throw(name)) continue;
    if (cmd && cmd->get_option_no_throw(name)) continue;
    return name;
  }
  return std::nullopt;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Network topology extraction by iterative patch connectivity"};
  app.name("topotrace");
  app.set_version_flag("--version",
                       std::string("topotrace ") + TOPOTRACE_VERSION +
                           "\nformats: network graph JSON v1 (read/write), PGM P5 8/16-bit (read/write), PPM P6 (write)");
  app.require_subcommand(1);

  SynthOptions synth;
  GenGtOptions gen_gt;
  TraceOptions trace_opts;
  BaselineOptions baseline;
  EvalOptions eval;
  CurveOptions curve;
  add_synth(app, synth);
  add_gen_gt(app, gen_gt);
  add_trace(app, trace_opts);
  add_baseline(app, baseline);
  add_eval(app, eval);
  add_curve(app, curve);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    const auto typo = unknown_flag(args, app, subs.empty() ? nullptr : subs.front());
    err << "topotrace: " << (typo ? "unknown option " + *typo : one_line(e.what())) << "\n\n";
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    const std::string name = cmd->get_name();
    if (name == "synth") return run_synth(synth, out);
    if (name == "gen-gt") return run_gen_gt(gen_gt, out);
    if (name == "trace") return run_trace(trace_opts, out);
    if (name == "skeleton-baseline") return run_baseline(baseline, out);
    if (name == "eval") return run_eval(eval, out);
    return run_curve(curve, out, err);
  } catch (const UsageError& e) {
    err << "topotrace " << cmd->get_name() << ": " << e.what() << "\n\n" << cmd->help();
    return 2;
  } catch (const std::exception& e) {
    err << "topotrace " << cmd->get_name() << ": error: " << one_line(e.what()) << "\n";
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace topotrace::cli
