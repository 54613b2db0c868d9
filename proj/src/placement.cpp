#include "dbslam/placement.hpp"

#include <cmath>

#include "dbslam/error.hpp"

namespace dbslam {

void Mesh::validate() const {
  const auto n = static_cast<long long>(vertices.size());
  for (const auto& f : faces) {
    for (const int i : f) {
      if (i < 0 || i >= n) throw InvalidInput("mesh: face index out of range");
    }
  }
}

Pose human_to_world(const Mat3& camera_rotation, const Vec3& p_w) {
  const double err = (camera_rotation.transpose() * camera_rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!camera_rotation.allFinite() || err > Pose::kOrthonormalTolerance ||
      std::abs(camera_rotation.determinant() - 1.0) > Pose::kOrthonormalTolerance) {
    throw InvalidInput("human_to_world: camera rotation is not orthonormal");
  }
  return {camera_rotation * rot_x(kHumanFlipDegrees), p_w};
}

Mesh transform_mesh(const Mesh& mesh, const Pose& pose) {
  Mesh out;
  out.faces = mesh.faces;
  out.vertices.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) out.vertices.push_back(pose * v);
  return out;
}

}  // namespace dbslam
