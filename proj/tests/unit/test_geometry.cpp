#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dbslam/error.hpp"
#include "dbslam/geometry.hpp"

using namespace dbslam;

namespace {

Pose random_pose(std::mt19937_64& rng, double max_angle = 3.0, double max_t = 5.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
  const double angle = std::abs(u(rng)) * max_angle;
  const Eigen::Quaterniond q(Eigen::AngleAxisd(angle, axis));
  return Pose::from_quaternion(q, Vec3(u(rng), u(rng), u(rng)) * max_t);
}

Intrinsics tum_like() {
  Intrinsics k;
  k.fx = 500.0;
  k.fy = 500.0;
  k.cx = 320.0;
  k.cy = 240.0;
  return k;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("backproject examples") {
  const Intrinsics k = tum_like();
  const Point3H axis = backproject(k.cx, k.cy, 2.0, k);
  CHECK(axis.x == 0.0);
  CHECK(axis.y == 0.0);
  CHECK(axis.z == 2.0);
  CHECK(axis.w == 1.0);

  const Point3H p = backproject(470, 340, 2.0, k);
  CHECK(p.x == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(p.y == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(p.z == 2.0);
  CHECK(p.w == 1.0);

  CHECK_THROWS_AS(backproject(k.cx, k.cy, 0.0, k), InvalidInput);
  CHECK_THROWS_AS(backproject(k.cx, k.cy, -1.0, k), InvalidInput);
  CHECK_THROWS_AS(backproject(-1.0, 10.0, 1.0, k), InvalidInput);
}

TEST_CASE("project examples") {
  const Intrinsics k = tum_like();
  const PixelDepth px = project({0, 0, 2, 1}, k);
  CHECK(px.u == k.cx);
  CHECK(px.v == k.cy);
  CHECK(px.depth == 2.0);
  CHECK_THROWS_AS(project({0, 0, -1, 1}, k), InvalidInput);
  CHECK_THROWS_AS(project({0, 0, 0, 1}, k), InvalidInput);
}

TEST_CASE("project inverts backproject on random pixels") {
  const Intrinsics k = tum_like();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uu(0.0, k.width - 1.0), vv(0.0, k.height - 1.0),
      dd(0.1, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double u = uu(rng), v = vv(rng), d = dd(rng);
    const PixelDepth px = project(backproject(u, v, d, k), k);
    worst = std::max({worst, std::abs(px.u - u), std::abs(px.v - v), std::abs(px.depth - d)});
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("intrinsics validation") {
  Intrinsics k;
  CHECK_NOTHROW(k.validate());
  k.fx = 0.0;
  CHECK_THROWS_AS(k.validate(), InvalidInput);
  k = Intrinsics{};
  k.cx = 700.0;
  CHECK_THROWS_AS(k.validate(), InvalidInput);
}

TEST_CASE("pose construction rejects improper rotations") {
  CHECK_THROWS_AS(Pose(Mat3::Identity() * 1.01, Vec3::Zero()), InvalidInput);
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1.0;
  CHECK_THROWS_AS(Pose(reflect, Vec3::Zero()), InvalidInput);
  Mat4 m = Mat4::Identity();
  m(3, 0) = 1.0;
  CHECK_THROWS_AS(Pose::from_matrix(m), InvalidInput);
}

TEST_CASE("compose and invert examples") {
  const Pose i = compose(Pose::identity(), Pose::identity());
  CHECK(i.rotation() == Mat3::Identity());
  CHECK(i.translation() == Vec3::Zero());

  const Pose t = invert(Pose::from_translation({1, 2, 3}));
  CHECK(t.translation() == Vec3(-1, -2, -3));
  CHECK(t.rotation() == Mat3::Identity());

  std::mt19937_64 rng(2);
  for (int n = 0; n < 200; ++n) {
    const Pose a = random_pose(rng);
    const Pose e = compose(a, invert(a));
    CHECK((e.rotation() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(e.translation().norm() < 1e-9);
  }
}

TEST_CASE("long composition chains stay orthonormal") {
  std::mt19937_64 rng(3);
  Pose chain;
  for (int n = 0; n < 10000; ++n) chain = compose(chain, random_pose(rng, 0.05, 0.01));
  CHECK(chain.orthonormality_error() < 1e-6);
  CHECK(std::abs(chain.rotation().determinant() - 1.0) < 1e-6);
}

TEST_CASE("se3 exp and log") {
  const Pose e = se3_exp(Vec6::Zero());
  CHECK(e.rotation() == Mat3::Identity());
  CHECK(e.translation() == Vec3::Zero());

  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const Pose t = random_pose(rng, 3.0);
    const Pose back = se3_exp(se3_log(t));
    worst = std::max(worst, (back.matrix() - t.matrix()).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-9);

  for (const double theta : {1e-9, 1e-4, 0.01, 0.3}) {
    Vec6 xi = Vec6::Zero();
    xi(5) = theta;
    const Mat3 r = se3_exp(xi).rotation();
    Mat3 rz;
    rz << std::cos(theta), -std::sin(theta), 0, std::sin(theta), std::cos(theta), 0, 0, 0, 1;
    CHECK((r - rz).cwiseAbs().maxCoeff() < 1e-14);
  }

  const Pose half_turn(rot_x(180.0), Vec3::Zero());
  CHECK_THROWS_AS((void)se3_log(half_turn), NumericalError);
}

TEST_CASE("se3 left jacobian matches finite differences of the exponential") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vec6 xi;
    for (int i = 0; i < 6; ++i) xi(i) = n(rng) * (trial % 2 == 0 ? 1.0 : 0.01);
    const Mat6 j = se3_left_jacobian(xi);
    // exp(xi + d) * exp(xi)^-1 ~ exp(J d) for small d.
    const double h = 1e-6;
    for (int k = 0; k < 6; ++k) {
      Vec6 d = Vec6::Zero();
      d(k) = h;
      const Vec6 plus = se3_log(se3_exp(xi + d) * se3_exp(xi).inverse());
      const Vec6 minus = se3_log(se3_exp(xi - d) * se3_exp(xi).inverse());
      const Vec6 col = (plus - minus) / (2.0 * h);
      CHECK((col - j.col(k)).norm() < 1e-6 * std::max(1.0, j.col(k).norm()));
    }
  }
}

TEST_CASE("so3 log near pi keeps the axis") {
  const Vec3 axis = Vec3(1, 2, -0.5).normalized();
  const double theta = std::numbers::pi - 1e-3;
  const Vec3 w = so3_log(so3_exp(axis * theta));
  CHECK((w - axis * theta).norm() < 1e-9);
}

TEST_CASE("rot_x examples") {
  Mat3 diag = Mat3::Zero();
  diag.diagonal() << 1.0, -1.0, -1.0;
  CHECK(rot_x(180.0) == diag);
  CHECK(rot_x(0.0) == Mat3::Identity());
  CHECK(rot_x(90.0) * Vec3(0, 1, 0) == Vec3(0, 0, 1));
  CHECK(rot_x(-90.0) * Vec3(0, 0, 1) == Vec3(0, 1, 0));
  const Mat3 r = rot_x(33.0);
  CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(rot_z(90.0) * Vec3(1, 0, 0) == Vec3(0, 1, 0));
}

TEST_CASE("quaternion and matrix round trips") {
  std::mt19937_64 rng(6);
  for (int n = 0; n < 100; ++n) {
    const Pose p = random_pose(rng);
    const Pose q = Pose::from_quaternion(p.quaternion(), p.translation());
    CHECK((q.matrix() - p.matrix()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(p.quaternion().w() >= 0.0);
    const Pose m = Pose::from_matrix(p.matrix());
    CHECK(m.matrix() == p.matrix());
  }
  CHECK_THROWS_AS(Pose::from_quaternion(Eigen::Quaterniond(0, 0, 0, 0), Vec3::Zero()), InvalidInput);
}

}  // TEST_SUITE
