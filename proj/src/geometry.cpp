#include "dbslam/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <numbers>
#include <string>

#include "dbslam/error.hpp"

namespace dbslam {

namespace {

constexpr double kSmallAngle = 1e-8;
// Below this angle the closed-form SE(3) Jacobian coefficients lose precision to
// cancellation, so their Taylor series are used instead.
constexpr double kSeriesAngle = 0.1;

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw InvalidInput("intrinsics: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw InvalidInput("intrinsics: image size must be positive");
  }
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw InvalidInput("intrinsics: principal point outside image");
  }
}

Intrinsics Intrinsics::half() const {
  Intrinsics k;
  k.fx = fx * 0.5;
  k.fy = fy * 0.5;
  k.cx = (cx + 0.5) * 0.5 - 0.5;
  k.cy = (cy + 0.5) * 0.5 - 0.5;
  k.width = width / 2;
  k.height = height / 2;
  return k;
}

Pose::Pose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw InvalidInput("pose: non-finite entries");
  }
  if (orthonormality_error() > kOrthonormalTolerance ||
      std::abs(rotation.determinant() - 1.0) > kOrthonormalTolerance) {
    throw InvalidInput("pose: rotation is not orthonormal with determinant 1");
  }
}

Pose Pose::from_quaternion(const Eigen::Quaterniond& q, const Vec3& t) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw InvalidInput("pose: degenerate quaternion");
  }
  return {orthonormalize(q.normalized().toRotationMatrix()), t};
}

Pose Pose::from_matrix(const Mat4& m) {
  if (m.row(3).head<3>().norm() != 0.0 || m(3, 3) != 1.0) {
    throw InvalidInput("pose: bottom row of homogeneous matrix must be (0,0,0,1)");
  }
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Eigen::Quaterniond Pose::quaternion() const {
  Eigen::Quaterniond q(rotation_);
  q.normalize();
  // Canonical sign: non-negative w.
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

Pose Pose::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_), Unchecked{}};
}

Pose Pose::operator*(const Pose& other) const {
  return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_,
          Unchecked{}};
}

double Pose::orthonormality_error() const {
  return (rotation_.transpose() * rotation_ - Mat3::Identity()).cwiseAbs().maxCoeff();
}

Point3H backproject(double u, double v, double depth, const Intrinsics& k) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw InvalidInput("backproject: depth must be positive, got " + std::to_string(depth));
  }
  if (!k.contains(u, v)) {
    throw InvalidInput("backproject: pixel outside image domain");
  }
  return {(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth, 1.0};
}

PixelDepth project(const Point3H& p, const Intrinsics& k) {
  const Vec3 e = p.euclidean();
  if (!(e.z() > 0.0)) {
    throw InvalidInput("project: point is behind the camera");
  }
  return {e.x() / e.z() * k.fx + k.cx, e.y() / e.z() * k.fy + k.cy, e.z()};
}

Pose compose(const Pose& a, const Pose& b) {
  const Pose raw = a * b;
  return {orthonormalize(raw.rotation()), raw.translation()};
}

Pose invert(const Pose& a) { return a.inverse(); }

Mat3 skew(const Vec3& w) {
  Mat3 s;
  s << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return s;
}

Mat3 so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  if (theta < kSmallAngle) {
    return orthonormalize(Mat3::Identity() + w + 0.5 * w * w);
  }
  const double t2 = theta * theta;
  const double a = std::sin(theta) / theta;
  const double b = theta < kSeriesAngle
                       ? 0.5 - t2 / 24.0 + t2 * t2 / 720.0 - t2 * t2 * t2 / 40320.0
                       : (1.0 - std::cos(theta)) / t2;
  return Mat3::Identity() + a * w + b * w * w;
}

Vec3 so3_log(const Mat3& r) {
  const Vec3 axis_sin{0.5 * (r(2, 1) - r(1, 2)), 0.5 * (r(0, 2) - r(2, 0)),
                      0.5 * (r(1, 0) - r(0, 1))};
  const double s = axis_sin.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  const double theta = std::atan2(s, c);
  if (theta < kSmallAngle) {
    return axis_sin;
  }
  if (c > -0.5) {
    return axis_sin * (theta / s);
  }
  // Large angles: recover the axis from the symmetric part, sign from the skew part.
  const Mat3 b = 0.5 * (r + r.transpose()) - c * Mat3::Identity();
  int i = 0;
  b.diagonal().maxCoeff(&i);
  Vec3 axis = b.col(i) / std::sqrt(std::max(b(i, i), 0.0));
  axis.normalize();
  if (axis.dot(axis_sin) < 0.0) axis = -axis;
  return axis * theta;
}

Mat3 so3_left_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  const double t2 = theta * theta;
  if (theta < kSeriesAngle) {
    const double a = 0.5 - t2 / 24.0 + t2 * t2 / 720.0 - t2 * t2 * t2 / 40320.0;
    const double b = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362880.0;
    return Mat3::Identity() + a * w + b * w * w;
  }
  return Mat3::Identity() + (1.0 - std::cos(theta)) / t2 * w +
         (theta - std::sin(theta)) / (t2 * theta) * w * w;
}

namespace {

Mat3 so3_left_jacobian_inverse(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  const double t2 = theta * theta;
  if (theta < kSeriesAngle) {
    const double coeff = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0 + t2 * t2 * t2 / 1209600.0;
    return Mat3::Identity() - 0.5 * w + coeff * w * w;
  }
  const double coeff =
      (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / t2;
  return Mat3::Identity() - 0.5 * w + coeff * w * w;
}

// Coupling block of the SE(3) left Jacobian.
Mat3 se3_q_block(const Vec3& rho, const Vec3& phi) {
  const double theta = phi.norm();
  const double t2 = theta * theta;
  double a, b, c;
  if (theta < kSeriesAngle) {
    const double t4 = t2 * t2;
    const double t6 = t4 * t2;
    a = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0 - t6 / 362880.0;
    b = 1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0 - t6 / 3628800.0;
    c = 1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0 - t6 / 9979200.0;
  } else {
    const double s = std::sin(theta);
    const double co = std::cos(theta);
    a = (theta - s) / (t2 * theta);
    b = (t2 + 2.0 * co - 2.0) / (2.0 * t2 * t2);
    c = (2.0 * theta - 3.0 * s + theta * co) / (2.0 * t2 * t2 * theta);
  }
  const Mat3 p = skew(phi);
  const Mat3 r = skew(rho);
  const Mat3 pr = p * r;
  const Mat3 rp = r * p;
  const Mat3 prp = pr * p;
  return 0.5 * r + a * (pr + rp + prp) + b * (p * pr + rp * p - 3.0 * prp) +
         c * (prp * p + p * prp);
}

}  // namespace

Pose se3_exp(const Vec6& twist) {
  const Vec3 v = twist.head<3>();
  const Vec3 omega = twist.tail<3>();
  return {so3_exp(omega), so3_left_jacobian(omega) * v};
}

Vec6 se3_log(const Pose& pose) {
  const Vec3 omega = so3_log(pose.rotation());
  if (omega.norm() > std::numbers::pi - 1e-6) {
    throw NumericalError("se3_log: rotation angle too close to pi");
  }
  Vec6 xi;
  xi.head<3>() = so3_left_jacobian_inverse(omega) * pose.translation();
  xi.tail<3>() = omega;
  return xi;
}

Mat6 se3_left_jacobian(const Vec6& twist) {
  const Vec3 rho = twist.head<3>();
  const Vec3 phi = twist.tail<3>();
  const Mat3 j = so3_left_jacobian(phi);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = j;
  out.bottomRightCorner<3, 3>() = j;
  out.topRightCorner<3, 3>() = se3_q_block(rho, phi);
  return out;
}

Mat3 rot_x(double theta_deg) {
  Mat3 r = Mat3::Identity();
  // Exact values at multiples of 90 degrees, so rot_x(180) is diag(1, -1, -1) bit-for-bit.
  const double turns = theta_deg / 90.0;
  double c, s;
  if (turns == std::round(turns)) {
    const int q = ((static_cast<long long>(std::round(turns)) % 4) + 4) % 4;
    static constexpr double kCos[] = {1.0, 0.0, -1.0, 0.0};
    static constexpr double kSin[] = {0.0, 1.0, 0.0, -1.0};
    c = kCos[q];
    s = kSin[q];
  } else {
    c = std::cos(deg_to_rad(theta_deg));
    s = std::sin(deg_to_rad(theta_deg));
  }
  r(1, 1) = c;
  r(1, 2) = -s;
  r(2, 1) = s;
  r(2, 2) = c;
  return r;
}

Mat3 rot_z(double theta_deg) {
  // rot_z(t) = P * rot_x(t) * P^T with the cyclic permutation x->z.
  const Mat3 rx = rot_x(theta_deg);
  Mat3 r = Mat3::Identity();
  r(0, 0) = rx(1, 1);
  r(0, 1) = rx(1, 2);
  r(1, 0) = rx(2, 1);
  r(1, 1) = rx(2, 2);
  return r;
}

Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

}  // namespace dbslam
