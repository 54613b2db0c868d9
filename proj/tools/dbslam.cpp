// Command-line front end: simulate, run, evaluate, place-mesh.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dbslam/error.hpp"
#include "dbslam/evaluation.hpp"
#include "dbslam/io.hpp"
#include "dbslam/pipeline.hpp"
#include "dbslam/placement.hpp"
#include "dbslam/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : dbslam::Error {
  using Error::Error;
};

int cmd_simulate(const fs::path& scene_file, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
  dbslam::SyntheticScene scene = dbslam::load_scene(scene_file);
  if (seed) scene.seed = *seed;
  const auto seq = dbslam::generate_sequence(scene, out_dir);
  std::cout << "wrote " << seq.frames << " frames to " << out_dir.string() << "\n";
  return kOk;
}

// Extra `--key value` / `--key=value` tokens become configuration overrides.
void apply_overrides(dbslam::PipelineConfig& cfg, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() <= 2) throw UsageError("unexpected argument '" + tok + "'");
    std::string key = tok.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size()) throw UsageError("option '" + tok + "' needs a value");
      value = extras[++i];
    }
    std::replace(key.begin(), key.end(), '-', '_');
    try {
      cfg.set(key, value);
    } catch (const dbslam::InvalidInput& e) {
      throw UsageError(e.what());
    }
  }
}

int cmd_run(const fs::path& dataset, const fs::path& detections, const fs::path& config_file,
            const fs::path& out_dir, bool no_filter, const std::vector<std::string>& extras) {
  dbslam::PipelineConfig cfg;
  cfg.apply(dbslam::read_key_values(config_file));
  apply_overrides(cfg, extras);
  if (no_filter) cfg.set("filter", "false");
  const auto result = dbslam::run_pipeline(dataset, detections, cfg);
  dbslam::write_pipeline_outputs(result, out_dir);

  double filter_ms = 0.0, total_ms = 0.0;
  for (const auto& t : result.timings) {
    filter_ms += t.filter_ms;
    total_ms += t.filter_ms + t.odometry_ms + t.tracking_ms + t.fusion_ms;
  }
  const double n = std::max<double>(1.0, static_cast<double>(result.timings.size()));
  std::fprintf(stderr, "%zu frames, %zu tracks, %zu map points, filter %.2f ms/frame, %.1f fps, %zu odometry failures\n",
               result.timings.size(), result.tracks.size(), result.map.points.size(), filter_ms / n,
               total_ms > 0.0 ? 1000.0 * n / total_ms : 0.0, result.odometry_failures);
  return kOk;
}

int cmd_evaluate(const fs::path& est_file, const fs::path& gt_file, double max_dt, const std::string& csv) {
  const auto est = dbslam::read_trajectory(est_file);
  const auto gt = dbslam::read_trajectory(gt_file);
  const auto pairs = dbslam::associate_by_time(est, gt, max_dt);
  const dbslam::Pose alignment = dbslam::align_rigid(pairs);
  const auto errors = dbslam::position_errors(pairs, alignment);
  double sum = 0.0;
  for (double e : errors) sum += e * e;
  std::printf("%.6f\n", std::sqrt(sum / static_cast<double>(errors.size())));
  if (!csv.empty()) {
    std::string table = "timestamp,error_m\n";
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      table += dbslam::format_double(pairs[i].est_time) + "," + dbslam::format_double(errors[i]) + "\n";
    }
    dbslam::write_text_file(csv, table);
  }
  return kOk;
}

int cmd_place_mesh(const fs::path& mesh_file, const fs::path& track_file, const fs::path& pose_file,
                   long long frame_index, const fs::path& out_file, double max_dt) {
  const dbslam::Mesh mesh = dbslam::read_obj(mesh_file);
  const auto track = dbslam::read_trajectory(track_file);
  const auto camera = dbslam::read_trajectory(pose_file);
  if (frame_index < 0 || frame_index >= static_cast<long long>(track.size())) {
    throw UsageError("frame index " + std::to_string(frame_index) + " outside track of " +
                     std::to_string(track.size()) + " points");
  }
  const auto& point = track[static_cast<std::size_t>(frame_index)];
  // Camera pose at the same instant as the track point.
  const dbslam::StampedPose* best = nullptr;
  for (const auto& c : camera) {
    if (best == nullptr || std::abs(c.timestamp - point.timestamp) < std::abs(best->timestamp - point.timestamp)) {
      best = &c;
    }
  }
  if (best == nullptr || std::abs(best->timestamp - point.timestamp) > max_dt) {
    throw dbslam::DataError("no camera pose within " + dbslam::format_double(max_dt) + " s of t=" +
                            dbslam::format_double(point.timestamp));
  }
  const dbslam::Pose t_wh = dbslam::human_to_world(best->pose.rotation(), point.pose.translation());
  dbslam::write_obj(out_file, dbslam::transform_mesh(mesh, t_wh));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth-only dynamic-scene SLAM toolkit"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Render a synthetic RGB-D dataset from a scene description");
  std::string scene_file, sim_out;
  std::optional<std::uint64_t> seed;
  sim->add_option("scene", scene_file, "Scene description (JSON)")->required();
  sim->add_option("out_dir", sim_out, "Output dataset directory")->required();
  sim->add_option("--seed", seed, "Override the scene's noise seed");

  auto* run = app.add_subcommand("run", "Run the pipeline on a dataset");
  std::string dataset, detections, config_file, run_out;
  bool no_filter = false;
  run->add_option("dataset", dataset, "Dataset directory")->required();
  run->add_option("detections", detections, "Detection file")->required();
  run->add_option("config", config_file, "key = value configuration file")->required();
  run->add_option("out_dir", run_out, "Output directory")->required();
  run->add_flag("--no-filter", no_filter, "Bypass dual-box filtering (ablation)");
  run->allow_extras();
  run->footer("Any configuration key may be overridden with --key value.");

  auto* eval = app.add_subcommand("evaluate", "Absolute trajectory error after rigid alignment");
  std::string est_file, gt_file, csv;
  double max_dt = 0.02;
  eval->add_option("estimate", est_file, "Estimated trajectory (TUM format)")->required();
  eval->add_option("groundtruth", gt_file, "Ground-truth trajectory (TUM format)")->required();
  eval->add_option("--max-dt", max_dt, "Timestamp association tolerance in seconds")->check(CLI::NonNegativeNumber);
  eval->add_option("--csv", csv, "Write per-frame errors to this CSV file");

  auto* place = app.add_subcommand("place-mesh", "Place a body mesh at a track point in the world frame");
  std::string mesh_file, track_file, pose_file, place_out;
  long long frame_index = 0;
  double place_dt = 0.02;
  place->add_option("mesh", mesh_file, "Body mesh (OBJ), origin at the waist")->required();
  place->add_option("track", track_file, "Track file (TUM format)")->required();
  place->add_option("poses", pose_file, "Camera trajectory (TUM format)")->required();
  place->add_option("frame_index", frame_index, "Index of the track point")->required();
  place->add_option("out", place_out, "Output OBJ")->required();
  place->add_option("--max-dt", place_dt, "Camera pose lookup tolerance in seconds")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(scene_file, sim_out, seed);
    if (run->parsed()) return cmd_run(dataset, detections, config_file, run_out, no_filter, run->remaining());
    if (eval->parsed()) return cmd_evaluate(est_file, gt_file, max_dt, csv);
    if (place->parsed()) return cmd_place_mesh(mesh_file, track_file, pose_file, frame_index, place_out, place_dt);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const dbslam::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
