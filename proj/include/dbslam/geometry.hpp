#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dbslam {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Pinhole intrinsics. Pixel (u, v) has its center at continuous coordinate (u, v).
struct Intrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;

  /// Throws InvalidInput unless fx, fy > 0 and the principal point lies inside the image.
  void validate() const;

  /// Intrinsics of the image downsampled 2x by averaging 2x2 blocks.
  [[nodiscard]] Intrinsics half() const;

  [[nodiscard]] bool contains(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u <= width - 1.0 && v <= height - 1.0;
  }
};

/// Homogeneous 3D point; w is 1 for finite points.
struct Point3H {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double w = 1.0;

  [[nodiscard]] Vec3 euclidean() const { return {x / w, y / w, z / w}; }
  [[nodiscard]] Vec4 vector() const { return {x, y, z, w}; }
};

/// Result of projecting a camera-frame point.
struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Rigid transform stored as an orthonormal rotation matrix and a translation.
class Pose {
 public:
  static constexpr double kOrthonormalTolerance = 1e-9;

  Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

  /// Throws InvalidInput if `rotation` is not a proper rotation within kOrthonormalTolerance.
  Pose(const Mat3& rotation, const Vec3& translation);

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  /// Quaternion need not be normalized; it is normalized before conversion.
  static Pose from_quaternion(const Eigen::Quaterniond& q, const Vec3& t);
  /// Accepts a 4x4 homogeneous matrix; the bottom row must be (0, 0, 0, 1).
  static Pose from_matrix(const Mat4& m);

  [[nodiscard]] const Mat3& rotation() const { return rotation_; }
  [[nodiscard]] const Vec3& translation() const { return translation_; }
  [[nodiscard]] Mat4 matrix() const;
  [[nodiscard]] Eigen::Quaterniond quaternion() const;

  [[nodiscard]] Pose inverse() const;
  [[nodiscard]] Vec3 operator*(const Vec3& p) const { return rotation_ * p + translation_; }
  [[nodiscard]] Pose operator*(const Pose& other) const;

  /// Largest deviation of R^T R from identity.
  [[nodiscard]] double orthonormality_error() const;

 private:
  struct Unchecked {};
  Pose(const Mat3& rotation, const Vec3& translation, Unchecked)
      : rotation_(rotation), translation_(translation) {}

  Mat3 rotation_;
  Vec3 translation_;
};

/// ((u - cx) / fx * d, (v - cy) / fy * d, d, 1). Throws InvalidInput for d <= 0 or a
/// pixel outside the image domain.
Point3H backproject(double u, double v, double depth, const Intrinsics& k);

/// Inverse of backproject. Throws InvalidInput for z <= 0 (behind the camera).
PixelDepth project(const Point3H& p, const Intrinsics& k);

/// a * b, with the rotation re-orthonormalized so long chains do not drift.
Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& a);

/// Skew-symmetric cross-product matrix.
Mat3 skew(const Vec3& w);

Mat3 so3_exp(const Vec3& omega);
/// Rotation vector of R. Valid for angles up to pi.
Vec3 so3_log(const Mat3& rotation);
/// Left Jacobian of SO(3); also the V matrix of the SE(3) exponential.
Mat3 so3_left_jacobian(const Vec3& omega);

/// Twist ordering is (translation part, rotation part).
Pose se3_exp(const Vec6& twist);
/// Throws NumericalError when the rotation angle is within 1e-6 of pi.
Vec6 se3_log(const Pose& pose);
/// Left Jacobian J(xi): exp(xi + d) ~= exp(J(xi) d) * exp(xi).
Mat6 se3_left_jacobian(const Vec6& twist);

/// Rotation about the x axis; angle in degrees.
Mat3 rot_x(double theta_deg);
Mat3 rot_z(double theta_deg);

/// Projects a near-rotation onto SO(3) (closest rotation in Frobenius norm).
Mat3 orthonormalize(const Mat3& m);

}  // namespace dbslam
