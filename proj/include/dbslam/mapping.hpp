#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dbslam/geometry.hpp"
#include "dbslam/image.hpp"

namespace dbslam {

using Rgb = std::array<std::uint8_t, 3>;

/// World-frame point cloud; `colors` is either empty or parallel to `points`.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Rgb> colors;

  [[nodiscard]] bool colored() const { return !colors.empty(); }
  [[nodiscard]] std::size_t size() const { return points.size(); }
};

/// Appends every `stride`-th valid pixel (in both directions) of `depth`, back-projected
/// and mapped into the world by `pose`.
void fuse_frame(PointCloud& map, const DepthImage& depth, const Pose& pose, const Intrinsics& k,
                int stride = 1);

/// One centroid per occupied voxel, keyed by floor(coordinate / voxel). Voxels appear in
/// order of their first point. Throws InvalidInput for voxel <= 0.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

}  // namespace dbslam
