#pragma once

#include <array>
#include <vector>

#include "dbslam/geometry.hpp"

namespace dbslam {

/// Triangle mesh. The origin of the mesh frame is the body's waist (root joint).
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  /// Throws InvalidInput if a face index is out of range.
  void validate() const;
};

/// The human frame is flipped onto the world convention by this fixed x-axis rotation.
inline constexpr double kHumanFlipDegrees = 180.0;

/// Human-to-world transform: rotation R_i * R_x(180), translation p_w.
/// Throws InvalidInput if `camera_rotation` is not a proper rotation.
Pose human_to_world(const Mat3& camera_rotation, const Vec3& p_w);

Mesh transform_mesh(const Mesh& mesh, const Pose& pose);

}  // namespace dbslam
