#pragma once

#include <span>
#include <vector>

#include "dbslam/geometry.hpp"

namespace dbslam {

struct StampedPose {
  double timestamp = 0.0;  // seconds
  Pose pose;
};

/// Timestamped world-frame poses, strictly increasing in time.
using Trajectory = std::vector<StampedPose>;

/// Throws InvalidInput if timestamps are not strictly increasing.
void validate_trajectory(const Trajectory& trajectory);

struct PosePair {
  double est_time = 0.0;
  double gt_time = 0.0;
  Pose est;
  Pose gt;
};

/// One-to-one pairing by timestamp: candidate pairs with |dt| <= max_dt are taken in
/// ascending |dt|. Result is ordered by estimate timestamp. Throws DataError on no overlap.
std::vector<PosePair> associate_by_time(const Trajectory& est, const Trajectory& gt,
                                        double max_dt = 0.02);

/// Rigid (no scale) alignment S minimizing sum |gt_i - S est_i|^2 over positions.
/// Throws NumericalError for fewer than 3 pairs or collinear estimate positions.
Pose align_rigid(std::span<const PosePair> pairs);

/// Per-pair |gt position - alignment * est position|.
std::vector<double> position_errors(std::span<const PosePair> pairs, const Pose& alignment);

/// Root-mean-square of position_errors. Throws InvalidInput for an empty pair set.
double ate_rmse(std::span<const PosePair> pairs, const Pose& alignment);

/// Sum of distances between consecutive positions.
double trajectory_length(const Trajectory& trajectory);

}  // namespace dbslam
