#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dbslam/evaluation.hpp"
#include "dbslam/io.hpp"
#include "dbslam/mapping.hpp"
#include "dbslam/odometry.hpp"
#include "dbslam/separation.hpp"
#include "dbslam/tracking.hpp"

namespace dbslam {

struct PipelineConfig {
  FilterConfig filter;
  AssociationConfig association;
  OdometryConfig odometry;
  double voxel = 0.02;       // meters
  int fusion_stride = 4;     // pixels
  double depth_scale = 5000.0;
  Intrinsics intrinsics;
  bool filter_enabled = true;
  bool fuse = true;
  double detection_max_dt = 1e-4;  // seconds, detection-to-frame timestamp matching

  /// Sets one key. Throws InvalidInput for an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);
  void apply(const std::map<std::string, std::string>& values);
  /// Throws InvalidInput if any parameter is out of range.
  void validate() const;
  [[nodiscard]] bool was_set(const std::string& key) const { return explicit_keys_.count(key) > 0; }

 private:
  std::set<std::string> explicit_keys_;
};

/// Loads intrinsics and depth scale from `metadata.json` in `dataset_dir`, if present,
/// without overriding keys set explicitly in `cfg`.
void apply_dataset_metadata(PipelineConfig& cfg, const std::filesystem::path& dataset_dir);

struct FrameTiming {
  double timestamp = 0.0;
  double filter_ms = 0.0;
  double odometry_ms = 0.0;
  double tracking_ms = 0.0;
  double fusion_ms = 0.0;
};

struct PipelineResult {
  Trajectory camera;
  std::vector<Track> tracks;
  PointCloud map;
  std::vector<FrameTiming> timings;
  std::size_t odometry_failures = 0;
};

/// Frame-by-frame pipeline: dual-box filtering, frame-to-frame odometry on the filtered
/// background, human tracking in the world frame, and background fusion.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg);
  ~Pipeline();
  Pipeline(Pipeline&&) noexcept;
  Pipeline& operator=(Pipeline&&) noexcept;

  /// Frames must arrive in increasing timestamp order.
  void process(const FrameBundle& frame);
  [[nodiscard]] const PipelineResult& result() const { return result_; }
  /// Final map downsampling; returns the accumulated result.
  PipelineResult finish();

 private:
  struct State;
  PipelineConfig cfg_;
  PipelineResult result_;
  std::unique_ptr<State> state_;
};

/// Attaches detections to frames whose timestamps lie within `max_dt`.
void attach_detections(std::vector<FrameBundle>& frames, const std::vector<DetectionFrame>& detections,
                       double max_dt);

/// Runs the pipeline over a TUM-style dataset directory with a detection file.
PipelineResult run_pipeline(const std::filesystem::path& dataset_dir,
                            const std::filesystem::path& detections_file, PipelineConfig cfg);

/// Writes camera_trajectory.txt, track_<id>.txt, map.ply and timing.csv.
void write_pipeline_outputs(const PipelineResult& result, const std::filesystem::path& out_dir);

/// Per-frame timing table as CSV text.
std::string format_timing_csv(const std::vector<FrameTiming>& timings);

}  // namespace dbslam
