#include "dbslam/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <iostream>

#include <json.hpp>

#include "dbslam/error.hpp"
#include "dbslam/synthetic.hpp"

namespace dbslam {

namespace {

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) {
    throw InvalidInput("config: '" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}

int to_int(const std::string& key, const std::string& value) {
  int out = 0;
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) {
    throw InvalidInput("config: '" + key + "' expects an integer, got '" + value + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw InvalidInput("config: '" + key + "' expects true/false, got '" + value + "'");
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  if (key == "lambda") filter.lambda = to_double(key, value);
  else if (key == "bin_width") filter.bin_width = to_double(key, value);
  else if (key == "bg_margin") filter.bg_margin = to_double(key, value);
  else if (key == "human_margin") filter.human_margin = to_double(key, value);
  else if (key == "confidence_threshold") filter.confidence_threshold = to_double(key, value);
  else if (key == "gate") association.gate = to_double(key, value);
  else if (key == "max_misses") association.max_misses = to_int(key, value);
  else if (key == "pyramid_levels") odometry.pyramid_levels = to_int(key, value);
  else if (key == "max_iterations") odometry.max_iterations = to_int(key, value);
  else if (key == "convergence_eps") odometry.convergence_eps = to_double(key, value);
  else if (key == "dense_weight") odometry.dense_weight = to_double(key, value);
  else if (key == "huber_delta") odometry.huber_delta = to_double(key, value);
  else if (key == "max_correspondence_distance") odometry.max_correspondence_distance = to_double(key, value);
  else if (key == "discontinuity") odometry.discontinuity = to_double(key, value);
  else if (key == "normal_radius") odometry.normal_radius = to_int(key, value);
  else if (key == "min_valid_pixels") odometry.min_valid_pixels = static_cast<std::size_t>(to_int(key, value));
  else if (key == "voxel") voxel = to_double(key, value);
  else if (key == "fusion_stride") fusion_stride = to_int(key, value);
  else if (key == "depth_scale") depth_scale = to_double(key, value);
  else if (key == "fx") intrinsics.fx = to_double(key, value);
  else if (key == "fy") intrinsics.fy = to_double(key, value);
  else if (key == "cx") intrinsics.cx = to_double(key, value);
  else if (key == "cy") intrinsics.cy = to_double(key, value);
  else if (key == "width") intrinsics.width = to_int(key, value);
  else if (key == "height") intrinsics.height = to_int(key, value);
  else if (key == "filter") filter_enabled = to_bool(key, value);
  else if (key == "fuse") fuse = to_bool(key, value);
  else if (key == "detection_max_dt") detection_max_dt = to_double(key, value);
  else throw InvalidInput("config: unknown key '" + key + "'");
  explicit_keys_.insert(key);
}

void PipelineConfig::apply(const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) set(k, v);
}

void PipelineConfig::validate() const {
  filter.validate();
  if (!(filter.confidence_threshold >= 0.0 && filter.confidence_threshold < 1.0)) {
    throw InvalidInput("config: confidence_threshold must be in [0, 1)");
  }
  association.validate();
  odometry.validate();
  intrinsics.validate();
  if (!(voxel > 0.0)) throw InvalidInput("config: voxel must be positive");
  if (fusion_stride < 1) throw InvalidInput("config: fusion_stride must be >= 1");
  if (!(depth_scale > 0.0)) throw InvalidInput("config: depth_scale must be positive");
  if (!(detection_max_dt >= 0.0)) throw InvalidInput("config: detection_max_dt must be non-negative");
}

void apply_dataset_metadata(PipelineConfig& cfg, const std::filesystem::path& dataset_dir) {
  const auto path = dataset_dir / SequenceLayout::kMetadata;
  if (!std::filesystem::exists(path)) return;
  try {
    const auto meta = nlohmann::json::parse(read_text_file(path));
    if (meta.contains("depth_scale") && !cfg.was_set("depth_scale")) {
      cfg.depth_scale = meta["depth_scale"].get<double>();
    }
    if (meta.contains("intrinsics")) {
      const auto& k = meta["intrinsics"];
      if (!cfg.was_set("fx")) cfg.intrinsics.fx = k.value("fx", cfg.intrinsics.fx);
      if (!cfg.was_set("fy")) cfg.intrinsics.fy = k.value("fy", cfg.intrinsics.fy);
      if (!cfg.was_set("cx")) cfg.intrinsics.cx = k.value("cx", cfg.intrinsics.cx);
      if (!cfg.was_set("cy")) cfg.intrinsics.cy = k.value("cy", cfg.intrinsics.cy);
      if (!cfg.was_set("width")) cfg.intrinsics.width = k.value("width", cfg.intrinsics.width);
      if (!cfg.was_set("height")) cfg.intrinsics.height = k.value("height", cfg.intrinsics.height);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

struct Pipeline::State {
  std::optional<OdometryFrame> previous;
  Pose world = Pose::identity();
  Pose last_motion = Pose::identity();
  TrackStore tracks;
  std::size_t frames_since_downsample = 0;
  double last_timestamp = 0.0;
  bool started = false;

  explicit State(const AssociationConfig& cfg) : tracks(cfg) {}
};

Pipeline::Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  state_ = std::make_unique<State>(cfg_.association);
}

Pipeline::~Pipeline() = default;
Pipeline::Pipeline(Pipeline&&) noexcept = default;
Pipeline& Pipeline::operator=(Pipeline&&) noexcept = default;

void Pipeline::process(const FrameBundle& frame) {
  using Clock = std::chrono::steady_clock;
  const Intrinsics& k = cfg_.intrinsics;
  if (frame.depth.width() != k.width || frame.depth.height() != k.height) {
    throw DataError("pipeline: frame size does not match intrinsics");
  }
  if (state_->started && !(frame.timestamp > state_->last_timestamp)) {
    throw DataError("pipeline: frame timestamps must increase");
  }
  FrameTiming timing;
  timing.timestamp = frame.timestamp;

  // Dual-box filtering. In ablation mode the parts are still separated for tracking, but the
  // raw frame feeds odometry and fusion.
  auto t0 = Clock::now();
  SeparationResult sep;
  if (cfg_.filter_enabled) {
    sep = dual_bbox_filter(frame.depth, frame.detections, cfg_.filter);
  } else {
    const auto dets = filter_detections(frame.detections, cfg_.filter.confidence_threshold, k.width, k.height);
    sep = scene_separation(frame.depth, dets);
    sep.background = frame.depth;
  }
  timing.filter_ms = elapsed_ms(t0);

  t0 = Clock::now();
  OdometryFrame current(sep.background, k, cfg_.odometry);
  if (state_->previous) {
    Pose motion = Pose::identity();
    try {
      const OdometryReport report = estimate_pose(*state_->previous, current, state_->last_motion, cfg_.odometry);
      if (report.diverged) {
        std::clog << "odometry: diverged at t=" << format_double(frame.timestamp) << ", keeping previous pose\n";
        ++result_.odometry_failures;
      } else {
        motion = report.pose;
      }
    } catch (const NumericalError& e) {
      std::clog << "odometry: " << e.what() << " at t=" << format_double(frame.timestamp)
                << ", keeping previous pose\n";
      ++result_.odometry_failures;
    }
    state_->world = compose(state_->world, motion);
    state_->last_motion = motion;
  }
  state_->previous = std::move(current);
  result_.camera.push_back({frame.timestamp, state_->world});
  timing.odometry_ms = elapsed_ms(t0);

  t0 = Clock::now();
  std::vector<Vec3> observations;
  for (const HumanPart& part : sep.parts) {
    if (part.depth.valid_count() == 0) continue;  // counts as a miss for its track
    const double d_m = mean_depth(part.depth);
    observations.push_back(to_world(center_point(part.detection, d_m, k), state_->world));
  }
  state_->tracks.associate(frame.timestamp, observations);
  timing.tracking_ms = elapsed_ms(t0);

  t0 = Clock::now();
  if (cfg_.fuse) {
    fuse_frame(result_.map, sep.background, state_->world, k, cfg_.fusion_stride);
    if (++state_->frames_since_downsample >= 30) {
      result_.map = voxel_downsample(result_.map, cfg_.voxel);
      state_->frames_since_downsample = 0;
    }
  }
  timing.fusion_ms = elapsed_ms(t0);

  result_.timings.push_back(timing);
  state_->last_timestamp = frame.timestamp;
  state_->started = true;
}

PipelineResult Pipeline::finish() {
  if (cfg_.fuse && !result_.map.points.empty()) result_.map = voxel_downsample(result_.map, cfg_.voxel);
  result_.tracks = state_->tracks.all();
  return result_;
}

namespace {

const DetectionFrame* find_detections(const std::vector<DetectionFrame>& sorted, double t, double max_dt) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), t - max_dt,
                             [](const DetectionFrame& f, double x) { return f.timestamp < x; });
  const DetectionFrame* best = nullptr;
  for (; it != sorted.end() && it->timestamp <= t + max_dt; ++it) {
    if (best == nullptr || std::abs(it->timestamp - t) < std::abs(best->timestamp - t)) best = &*it;
  }
  return best;
}

std::vector<DetectionFrame> sorted_detections(std::vector<DetectionFrame> detections) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const DetectionFrame& a, const DetectionFrame& b) { return a.timestamp < b.timestamp; });
  return detections;
}

}  // namespace

void attach_detections(std::vector<FrameBundle>& frames, const std::vector<DetectionFrame>& detections,
                       double max_dt) {
  const auto sorted = sorted_detections(detections);
  for (FrameBundle& f : frames) {
    if (const DetectionFrame* d = find_detections(sorted, f.timestamp, max_dt)) f.detections = d->detections;
  }
}

PipelineResult run_pipeline(const std::filesystem::path& dataset_dir,
                            const std::filesystem::path& detections_file, PipelineConfig cfg) {
  apply_dataset_metadata(cfg, dataset_dir);
  const auto detections = sorted_detections(read_detections(detections_file));
  TumSequenceReader reader(dataset_dir, cfg.depth_scale);
  Pipeline pipeline(cfg);
  while (auto frame = reader.next()) {
    if (const DetectionFrame* d = find_detections(detections, frame->timestamp, cfg.detection_max_dt)) {
      frame->detections = d->detections;
    }
    pipeline.process(*frame);
  }
  return pipeline.finish();
}

std::string format_timing_csv(const std::vector<FrameTiming>& timings) {
  std::string out = "timestamp,filter_ms,odometry_ms,tracking_ms,fusion_ms\n";
  char buf[160];
  for (const FrameTiming& t : timings) {
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f,%.4f\n", format_double(t.timestamp).c_str(),
                  t.filter_ms, t.odometry_ms, t.tracking_ms, t.fusion_ms);
    out += buf;
  }
  return out;
}

void write_pipeline_outputs(const PipelineResult& result, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_trajectory(out_dir / "camera_trajectory.txt", result.camera);
  for (const Track& track : result.tracks) {
    Trajectory points;
    points.reserve(track.points.size());
    for (const TrackPoint& p : track.points) points.push_back({p.timestamp, Pose::from_translation(p.position)});
    write_trajectory(out_dir / ("track_" + std::to_string(track.id) + ".txt"), points);
  }
  write_ply(out_dir / "map.ply", result.map);
  write_text_file(out_dir / "timing.csv", format_timing_csv(result.timings));
}

}  // namespace dbslam
