#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dbslam/evaluation.hpp"
#include "dbslam/geometry.hpp"
#include "dbslam/image.hpp"

namespace dbslam {

/// Infinite plane through `point` with normal `normal` (world frame).
struct Plane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
};

/// Axis-aligned box [min, max].
struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  [[nodiscard]] Box translated(const Vec3& t) const { return {min + t, max + t}; }
  [[nodiscard]] Vec3 center() const { return 0.5 * (min + max); }
};

struct Waypoint {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
};

/// Moving box: `shape` is expressed in the actor frame, which is translated along `path`.
struct Actor {
  Box shape;
  std::vector<Waypoint> path;  // piecewise linear, ascending t

  [[nodiscard]] Vec3 position_at(double t) const;
  [[nodiscard]] Box box_at(double t) const { return shape.translated(position_at(t)); }
};

struct CameraWaypoint {
  double t = 0.0;
  Pose pose;  // camera-to-world
};

struct SyntheticScene {
  std::vector<Plane> planes;
  std::vector<Box> boxes;
  std::vector<Actor> actors;
  std::vector<CameraWaypoint> camera_path;  // linear translation, slerp rotation
  Intrinsics intrinsics;
  double noise_sigma = 0.005;  // meters
  double rate = 30.0;          // Hz
  double start_time = 0.0;     // seconds
  double duration = 10.0;      // seconds
  std::uint64_t seed = 1;
  double depth_scale = 5000.0;
  double detection_jitter = 0.0;  // pixels, std-dev of per-edge Gaussian jitter

  /// Throws InvalidInput on inconsistent parameters or paths that do not cover the sequence.
  void validate() const;
  [[nodiscard]] std::size_t frame_count() const;
  [[nodiscard]] double frame_time(std::size_t i) const;
  [[nodiscard]] Pose camera_pose_at(double t) const;
};

/// Parses a JSON scene description. Throws DataError on malformed content.
SyntheticScene scene_from_json(const std::string& text);
SyntheticScene load_scene(const std::filesystem::path& path);

/// Noise-free ray distance along the z = 1 camera ray; 0 if nothing is hit.
double cast_ray(const SyntheticScene& scene, double t, const Vec3& origin, const Vec3& direction);

/// Depth frame at time t: nearest hit per pixel plus Gaussian noise drawn from a generator
/// seeded by (scene.seed, stream). Misses are 0.
DepthImage render_depth(const SyntheticScene& scene, double t, std::uint64_t stream = 0);

/// Tight box around the actor's projected (near-clipped) corners, clipped to the image,
/// confidence 1. Empty when the actor is behind the camera or projects outside the image.
std::optional<Detection> gt_detection(const Actor& actor, double t, const Pose& camera_pose,
                                      const Intrinsics& k);

/// Files written by generate_sequence.
struct SequenceLayout {
  static constexpr const char* kDepthIndex = "depth.txt";
  static constexpr const char* kDepthDir = "depth";
  static constexpr const char* kGroundTruth = "groundtruth.txt";
  static constexpr const char* kDetections = "detections.txt";
  static constexpr const char* kMetadata = "metadata.json";
  static std::string actor_file(std::size_t i) { return "actor_" + std::to_string(i) + ".txt"; }
};

struct GeneratedSequence {
  std::size_t frames = 0;
  Trajectory camera;
  std::vector<Trajectory> actors;  // identity rotations, positions of actor frames
};

/// Renders every frame and writes the dataset under `out_dir` (created if missing).
GeneratedSequence generate_sequence(const SyntheticScene& scene, const std::filesystem::path& out_dir);

}  // namespace dbslam
