#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dbslam/geometry.hpp"
#include "dbslam/image.hpp"

namespace dbslam {

struct TrackPoint {
  double timestamp = 0.0;
  Vec3 position = Vec3::Zero();
};

/// One human identity and its world-frame center history.
struct Track {
  int id = 0;
  std::vector<TrackPoint> points;
  int misses = 0;  // consecutive frames without a match

  /// Throws InvalidInput unless `timestamp` is later than the last point.
  void append(double timestamp, const Vec3& position);
  [[nodiscard]] const Vec3& last_position() const { return points.back().position; }
};

struct AssociationConfig {
  double gate = 0.8;    // meters
  int max_misses = 15;  // a track is terminated once misses exceeds this

  void validate() const;
};

/// Arithmetic mean of the nonzero depths. Throws InvalidInput if there are none.
double mean_depth(const DepthImage& part);

/// Center of `box` lifted to the camera frame at depth d_m. Throws InvalidInput for d_m <= 0.
Point3H center_point(const Detection& box, double d_m, const Intrinsics& k);

/// Euclidean part of pose * p.
Vec3 to_world(const Point3H& p, const Pose& pose);

/// Greedy global-nearest matching: candidate (track, observation) pairs within `gate` are
/// taken in ascending distance, ties by track index then observation index, each side at
/// most once. Returns (track index, observation index) pairs in selection order.
std::vector<std::pair<std::size_t, std::size_t>> greedy_match(std::span<const Vec3> track_positions,
                                                              std::span<const Vec3> observations,
                                                              double gate);

struct AssociationResult {
  /// (track id, observation index)
  std::vector<std::pair<int, std::size_t>> matches;
  std::vector<int> spawned;     // ids of tracks created from unmatched observations
  std::vector<int> terminated;  // ids of tracks dropped for exceeding max_misses
};

/// Live track set with id allocation and lifecycle.
class TrackStore {
 public:
  explicit TrackStore(AssociationConfig cfg = {});

  /// Associates the observations made at `timestamp` with the live tracks.
  AssociationResult associate(double timestamp, std::span<const Vec3> observations);

  [[nodiscard]] const std::vector<Track>& live() const { return live_; }
  [[nodiscard]] const std::vector<Track>& finished() const { return finished_; }
  /// Live and finished tracks ordered by id.
  [[nodiscard]] std::vector<Track> all() const;

 private:
  AssociationConfig cfg_;
  std::vector<Track> live_;
  std::vector<Track> finished_;
  int next_id_ = 0;
};

}  // namespace dbslam
