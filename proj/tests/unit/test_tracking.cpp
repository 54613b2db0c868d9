#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "dbslam/error.hpp"
#include "dbslam/tracking.hpp"

using namespace dbslam;

namespace {

Intrinsics k500() {
  Intrinsics k;
  k.fx = k.fy = 500.0;
  k.cx = 320.0;
  k.cy = 240.0;
  return k;
}

// Greedy selection by brute force: repeatedly scan every remaining pair for the smallest
// (distance, track index, observation index).
std::vector<std::pair<std::size_t, std::size_t>> greedy_oracle(const std::vector<Vec3>& tracks,
                                                               const std::vector<Vec3>& obs, double gate) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::vector<bool> used_t(tracks.size()), used_o(obs.size());
  while (true) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::size_t> pick{0, 0};
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      for (std::size_t j = 0; j < obs.size(); ++j) {
        if (used_t[i] || used_o[j]) continue;
        const double d = (tracks[i] - obs[j]).norm();
        if (d <= gate && d < best) {
          best = d;
          pick = {i, j};
        }
      }
    }
    if (best == std::numeric_limits<double>::infinity()) return out;
    used_t[pick.first] = used_o[pick.second] = true;
    out.push_back(pick);
  }
}

}  // namespace

TEST_SUITE("tracking") {

TEST_CASE("mean_depth examples") {
  CHECK(mean_depth(DepthImage(4, 4, 2.0f)) == 2.0);
  DepthImage mixed(5, 4);
  for (int i = 0; i < 10; ++i) mixed.data()[static_cast<std::size_t>(i)] = 1.0f;
  for (int i = 10; i < 20; ++i) mixed.data()[static_cast<std::size_t>(i)] = 3.0f;
  CHECK(mean_depth(mixed) == 2.0);

  // Zeroed pixels are not counted.
  DepthImage part(8, 8, 1.5f);
  double sum = 0.0;
  int count = 0;
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 8; ++u) {
      if ((u + v) % 3 == 0) {
        part(u, v) = 0.0f;
      } else {
        part(u, v) = static_cast<float>(1.0 + 0.1 * u);
        sum += part(u, v);
        ++count;
      }
    }
  }
  CHECK(mean_depth(part) == doctest::Approx(sum / count).epsilon(1e-12));
  CHECK_THROWS_AS(mean_depth(DepthImage(3, 3)), InvalidInput);
}

TEST_CASE("center_point examples") {
  const Intrinsics k = k500();
  const Point3H axis = center_point({300, 220, 340, 260, 1.0}, 2.0, k);
  CHECK(axis.x == 0.0);
  CHECK(axis.y == 0.0);
  CHECK(axis.z == 2.0);
  CHECK(axis.w == 1.0);

  const Point3H p = center_point({420, 240, 520, 440, 1.0}, 2.0, k);
  CHECK(std::abs(p.x - 0.6) < 1e-12);
  CHECK(std::abs(p.y - 0.4) < 1e-12);
  CHECK(p.z == 2.0);

  const Point3H b = backproject(470, 340, 2.0, k);
  CHECK(std::abs(b.x - p.x) < 1e-15);
  CHECK(std::abs(b.y - p.y) < 1e-15);
  CHECK_THROWS_AS(center_point({0, 0, 10, 10, 1.0}, 0.0, k), InvalidInput);
}

TEST_CASE("to_world examples") {
  const Point3H p{0, 0, 2, 1};
  CHECK(to_world(p, Pose::identity()) == Vec3(0, 0, 2));
  CHECK(to_world(p, Pose::from_translation({1, 0, 0})) == Vec3(1, 0, 2));

  std::mt19937_64 rng(30);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Pose t = Pose::from_quaternion(Eigen::Quaterniond(g(rng), g(rng), g(rng), g(rng)),
                                         Vec3(g(rng), g(rng), g(rng)));
    const Point3H q{g(rng), g(rng), 1.0 + std::abs(g(rng)), 1.0};
    const Vec4 h = t.matrix() * q.vector();
    CHECK((to_world(q, t) - h.head<3>() / h(3)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("association examples") {
  SUBCASE("nearest observation matched, far one spawns") {
    TrackStore store({0.5, 15});
    const std::vector<Vec3> first{Vec3(0, 0, 2)};
    store.associate(0.0, first);
    const std::vector<Vec3> obs{Vec3(0.1, 0, 2), Vec3(3, 0, 2)};
    const AssociationResult r = store.associate(0.1, obs);
    REQUIRE(r.matches.size() == 1);
    CHECK(r.matches[0].first == store.live()[0].id);
    CHECK(r.matches[0].second == 0);
    REQUIRE(r.spawned.size() == 1);
    CHECK(store.live().size() == 2);
  }
  SUBCASE("empty observations increment misses, then terminate") {
    TrackStore store({0.8, 2});
    store.associate(0.0, std::vector<Vec3>{Vec3(0, 0, 2)});
    store.associate(0.1, {});
    CHECK(store.live()[0].misses == 1);
    store.associate(0.2, {});
    CHECK(store.live().size() == 1);
    const AssociationResult r = store.associate(0.3, {});
    CHECK(r.terminated.size() == 1);
    CHECK(store.live().empty());
    CHECK(store.finished().size() == 1);
    CHECK(store.all().size() == 1);
  }
  SUBCASE("crossing pair picks the globally smallest distance first") {
    const std::vector<Vec3> tracks{Vec3(0, 0, 2), Vec3(0.5, 0, 2)};
    const std::vector<Vec3> obs{Vec3(0.45, 0, 2), Vec3(0.05, 0, 2)};
    const auto m = greedy_match(tracks, obs, 0.8);
    REQUIRE(m.size() == 2);
    CHECK(m[0] == std::pair<std::size_t, std::size_t>{1, 0});
    CHECK(m[1] == std::pair<std::size_t, std::size_t>{0, 1});
  }
}

TEST_CASE("greedy matching agrees with the brute-force oracle") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> n(0, 5);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Vec3> tracks, obs;
    const int nt = n(rng), no = n(rng);
    // Coarse grid coordinates make exact distance ties common.
    auto grid = [&] { return Vec3(std::round(u(rng) * 4) / 4, std::round(u(rng) * 4) / 4, 2.0); };
    for (int i = 0; i < nt; ++i) tracks.push_back(grid());
    for (int i = 0; i < no; ++i) obs.push_back(grid());
    const auto got = greedy_match(tracks, obs, 0.8);
    CHECK(got == greedy_oracle(tracks, obs, 0.8));

    std::set<std::size_t> ts, os;
    for (const auto& [t, o] : got) {
      CHECK(ts.insert(t).second);
      CHECK(os.insert(o).second);
      CHECK((tracks[t] - obs[o]).norm() <= 0.8);
    }
    CHECK(got == greedy_match(tracks, obs, 0.8));
  }
}

TEST_CASE("track timestamps must increase") {
  Track t;
  t.append(1.0, Vec3::Zero());
  CHECK_THROWS_AS(t.append(1.0, Vec3::Zero()), InvalidInput);
  CHECK_THROWS_AS(t.append(0.5, Vec3::Zero()), InvalidInput);
  t.append(1.5, Vec3::Ones());
  CHECK(t.last_position() == Vec3::Ones());

  AssociationConfig cfg;
  cfg.gate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

}  // TEST_SUITE
