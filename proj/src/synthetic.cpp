#include "dbslam/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

#include <json.hpp>

#include "dbslam/error.hpp"
#include "dbslam/io.hpp"

namespace dbslam {

namespace {

using json = nlohmann::json;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// Slab test; returns the entry distance or +inf. Grazing rays (entry == exit) miss.
double intersect_box(const Box& b, const Vec3& o, const Vec3& d) {
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d(a) == 0.0) {
      if (o(a) <= b.min(a) || o(a) >= b.max(a)) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (b.min(a) - o(a)) / d(a);
    double t1 = (b.max(a) - o(a)) / d(a);
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter < t_exit && t_enter > 0.0) return t_enter;
  return std::numeric_limits<double>::infinity();
}

double intersect_plane(const Plane& p, const Vec3& o, const Vec3& d) {
  const double denom = p.normal.dot(d);
  if (std::abs(denom) < 1e-12) return std::numeric_limits<double>::infinity();
  const double s = p.normal.dot(p.point - o) / denom;
  return s > 0.0 ? s : std::numeric_limits<double>::infinity();
}

Vec3 vec3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw DataError(std::string("scene: '") + what + "' must be an array of 3 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Box box_from(const json& j) {
  return {vec3_from(j.at("min"), "min"), vec3_from(j.at("max"), "max")};
}

Pose camera_pose_from(const json& j) {
  const Vec3 position = j.contains("position") ? vec3_from(j["position"], "position") : Vec3::Zero();
  if (j.contains("quaternion")) {
    const json& q = j["quaternion"];
    if (!q.is_array() || q.size() != 4) throw DataError("scene: 'quaternion' must have 4 numbers");
    return Pose::from_quaternion(
        Eigen::Quaterniond(q[3].get<double>(), q[0].get<double>(), q[1].get<double>(), q[2].get<double>()),
        position);
  }
  if (j.contains("euler_deg")) {
    const Vec3 e = vec3_from(j["euler_deg"], "euler_deg") * (std::numbers::pi / 180.0);
    const Mat3 r = (Eigen::AngleAxisd(e.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(e.y(), Vec3::UnitY()) *
                    Eigen::AngleAxisd(e.x(), Vec3::UnitX()))
                       .toRotationMatrix();
    return {orthonormalize(r), position};
  }
  return Pose::from_translation(position);
}

}  // namespace

Vec3 Actor::position_at(double t) const {
  if (path.empty()) return Vec3::Zero();
  if (t <= path.front().t) return path.front().position;
  if (t >= path.back().t) return path.back().position;
  auto it = std::upper_bound(path.begin(), path.end(), t,
                             [](double x, const Waypoint& w) { return x < w.t; });
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  const double s = (t - a.t) / (b.t - a.t);
  return a.position + s * (b.position - a.position);
}

void SyntheticScene::validate() const {
  intrinsics.validate();
  if (!(rate > 0.0)) throw InvalidInput("scene: rate must be positive");
  if (!(duration > 0.0)) throw InvalidInput("scene: duration must be positive");
  if (!(noise_sigma >= 0.0)) throw InvalidInput("scene: noise_sigma must be non-negative");
  if (!(depth_scale > 0.0)) throw InvalidInput("scene: depth_scale must be positive");
  if (!(detection_jitter >= 0.0)) throw InvalidInput("scene: detection_jitter must be non-negative");
  if (camera_path.empty()) throw InvalidInput("scene: camera path is empty");
  if (frame_count() == 0) throw InvalidInput("scene: sequence has no frames");
  const double t0 = start_time;
  const double t1 = frame_time(frame_count() - 1);
  auto check_cover = [&](double first, double last, std::size_t n, const char* what) {
    if (n > 1 && (first > t0 + 1e-9 || last < t1 - 1e-9)) {
      throw InvalidInput(std::string("scene: ") + what + " does not cover the sequence");
    }
  };
  for (std::size_t i = 1; i < camera_path.size(); ++i) {
    if (!(camera_path[i].t > camera_path[i - 1].t)) throw InvalidInput("scene: camera path times must increase");
  }
  check_cover(camera_path.front().t, camera_path.back().t, camera_path.size(), "camera path");
  for (const Actor& a : actors) {
    if (a.path.empty()) throw InvalidInput("scene: actor path is empty");
    for (std::size_t i = 1; i < a.path.size(); ++i) {
      if (!(a.path[i].t > a.path[i - 1].t)) throw InvalidInput("scene: actor path times must increase");
    }
    check_cover(a.path.front().t, a.path.back().t, a.path.size(), "actor path");
    for (int ax = 0; ax < 3; ++ax) {
      if (!(a.shape.min(ax) < a.shape.max(ax))) throw InvalidInput("scene: actor box is empty");
    }
  }
  for (const Plane& p : planes) {
    if (!(p.normal.norm() > 0.0)) throw InvalidInput("scene: plane normal is zero");
  }
}

std::size_t SyntheticScene::frame_count() const {
  return static_cast<std::size_t>(std::llround(duration * rate));
}

double SyntheticScene::frame_time(std::size_t i) const {
  return start_time + static_cast<double>(i) / rate;
}

Pose SyntheticScene::camera_pose_at(double t) const {
  if (camera_path.empty()) return Pose::identity();
  if (t <= camera_path.front().t) return camera_path.front().pose;
  if (t >= camera_path.back().t) return camera_path.back().pose;
  auto it = std::upper_bound(camera_path.begin(), camera_path.end(), t,
                             [](double x, const CameraWaypoint& w) { return x < w.t; });
  const CameraWaypoint& b = *it;
  const CameraWaypoint& a = *(it - 1);
  const double s = (t - a.t) / (b.t - a.t);
  const Eigen::Quaterniond q = a.pose.quaternion().slerp(s, b.pose.quaternion());
  return Pose::from_quaternion(q, a.pose.translation() + s * (b.pose.translation() - a.pose.translation()));
}

SyntheticScene scene_from_json(const std::string& text) {
  SyntheticScene s;
  try {
    const json j = json::parse(text);
    if (j.contains("intrinsics")) {
      const json& k = j["intrinsics"];
      s.intrinsics.fx = k.value("fx", s.intrinsics.fx);
      s.intrinsics.fy = k.value("fy", s.intrinsics.fy);
      s.intrinsics.cx = k.value("cx", s.intrinsics.cx);
      s.intrinsics.cy = k.value("cy", s.intrinsics.cy);
      s.intrinsics.width = k.value("width", s.intrinsics.width);
      s.intrinsics.height = k.value("height", s.intrinsics.height);
    }
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.rate = j.value("rate", s.rate);
    s.start_time = j.value("start_time", s.start_time);
    s.duration = j.value("duration", s.duration);
    s.seed = j.value("seed", s.seed);
    s.depth_scale = j.value("depth_scale", s.depth_scale);
    s.detection_jitter = j.value("detection_jitter", s.detection_jitter);
    for (const json& p : j.value("planes", json::array())) {
      s.planes.push_back({vec3_from(p.at("point"), "point"), vec3_from(p.at("normal"), "normal").normalized()});
    }
    for (const json& b : j.value("boxes", json::array())) s.boxes.push_back(box_from(b));
    for (const json& a : j.value("actors", json::array())) {
      Actor actor;
      actor.shape = box_from(a.at("shape"));
      for (const json& w : a.at("path")) {
        actor.path.push_back({w.at("t").get<double>(), vec3_from(w.at("position"), "position")});
      }
      s.actors.push_back(std::move(actor));
    }
    for (const json& c : j.at("camera_path")) {
      s.camera_path.push_back({c.at("t").get<double>(), camera_pose_from(c)});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("scene: ") + e.what());
  } catch (const InvalidInput& e) {
    throw DataError(e.what());
  }
  try {
    s.validate();
  } catch (const InvalidInput& e) {
    throw DataError(e.what());
  }
  return s;
}

SyntheticScene load_scene(const std::filesystem::path& path) {
  return scene_from_json(read_text_file(path));
}

double cast_ray(const SyntheticScene& scene, double t, const Vec3& origin, const Vec3& direction) {
  double best = std::numeric_limits<double>::infinity();
  for (const Plane& p : scene.planes) best = std::min(best, intersect_plane(p, origin, direction));
  for (const Box& b : scene.boxes) best = std::min(best, intersect_box(b, origin, direction));
  for (const Actor& a : scene.actors) best = std::min(best, intersect_box(a.box_at(t), origin, direction));
  return std::isfinite(best) ? best : 0.0;
}

DepthImage render_depth(const SyntheticScene& scene, double t, std::uint64_t stream) {
  const Intrinsics& k = scene.intrinsics;
  const Pose pose = scene.camera_pose_at(t);
  const Mat3& r = pose.rotation();
  const Vec3& o = pose.translation();

  // Primitives are fixed for the frame; hoist the actor placements.
  std::vector<Box> boxes = scene.boxes;
  for (const Actor& a : scene.actors) boxes.push_back(a.box_at(t));

  DepthImage out(k.width, k.height);
  std::mt19937_64 rng = make_rng(scene.seed, stream);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int v = 0; v < k.height; ++v) {
    float* row = out.row(v);
    const double y = (v - k.cy) / k.fy;
    for (int u = 0; u < k.width; ++u) {
      const Vec3 d = r * Vec3((u - k.cx) / k.fx, y, 1.0);
      double best = std::numeric_limits<double>::infinity();
      for (const Plane& p : scene.planes) best = std::min(best, intersect_plane(p, o, d));
      for (const Box& b : boxes) best = std::min(best, intersect_box(b, o, d));
      if (!std::isfinite(best)) continue;
      if (scene.noise_sigma > 0.0) best += scene.noise_sigma * noise(rng);
      row[u] = best > 0.0 ? static_cast<float>(best) : 0.0f;
    }
  }
  return out;
}

std::optional<Detection> gt_detection(const Actor& actor, double t, const Pose& camera_pose,
                                      const Intrinsics& k) {
  constexpr double kNear = 1e-3;
  const Box b = actor.box_at(t);
  const Pose world_to_camera = camera_pose.inverse();
  std::array<Vec3, 8> corners;
  for (int i = 0; i < 8; ++i) {
    const Vec3 w{(i & 1) ? b.max.x() : b.min.x(), (i & 2) ? b.max.y() : b.min.y(),
                 (i & 4) ? b.max.z() : b.min.z()};
    corners[static_cast<std::size_t>(i)] = world_to_camera * w;
  }
  std::vector<Vec3> front;
  for (const Vec3& c : corners) {
    if (c.z() >= kNear) front.push_back(c);
  }
  // Edges join corners differing in exactly one coordinate bit.
  for (int i = 0; i < 8; ++i) {
    for (int bit = 1; bit < 8; bit <<= 1) {
      const int j = i | bit;
      if (j == i) continue;
      const Vec3& a = corners[static_cast<std::size_t>(i)];
      const Vec3& c = corners[static_cast<std::size_t>(j)];
      if ((a.z() - kNear) * (c.z() - kNear) < 0.0) {
        const double s = (kNear - a.z()) / (c.z() - a.z());
        front.push_back(a + s * (c - a));
      }
    }
  }
  if (front.empty()) return std::nullopt;

  Detection det;
  det.x_ul = det.y_ul = std::numeric_limits<double>::infinity();
  det.x_lr = det.y_lr = -std::numeric_limits<double>::infinity();
  for (const Vec3& p : front) {
    const double u = k.fx * p.x() / p.z() + k.cx;
    const double v = k.fy * p.y() / p.z() + k.cy;
    det.x_ul = std::min(det.x_ul, u);
    det.x_lr = std::max(det.x_lr, u);
    det.y_ul = std::min(det.y_ul, v);
    det.y_lr = std::max(det.y_lr, v);
  }
  det.confidence = 1.0;
  det.x_ul = std::clamp(det.x_ul, 0.0, static_cast<double>(k.width));
  det.x_lr = std::clamp(det.x_lr, 0.0, static_cast<double>(k.width));
  det.y_ul = std::clamp(det.y_ul, 0.0, static_cast<double>(k.height));
  det.y_lr = std::clamp(det.y_lr, 0.0, static_cast<double>(k.height));
  if (!det.well_formed() || det.pixels(k.width, k.height).empty()) return std::nullopt;
  return det;
}

GeneratedSequence generate_sequence(const SyntheticScene& scene, const std::filesystem::path& out_dir) {
  scene.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / SequenceLayout::kDepthDir, ec);
  if (ec) throw IoError("cannot create " + (out_dir / SequenceLayout::kDepthDir).string() + ": " + ec.message());

  GeneratedSequence seq;
  seq.frames = scene.frame_count();
  seq.actors.resize(scene.actors.size());
  std::vector<DetectionFrame> detections;
  std::string index = "# depth maps\n# timestamp filename\n";
  std::mt19937_64 jitter_rng = make_rng(scene.seed, 0xD37EC7ULL);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const Intrinsics& k = scene.intrinsics;

  for (std::size_t i = 0; i < seq.frames; ++i) {
    const double t = scene.frame_time(i);
    const Pose pose = scene.camera_pose_at(t);
    seq.camera.push_back({t, pose});

    char name[32];
    std::snprintf(name, sizeof name, "%06zu.png", i);
    const std::string rel = std::string(SequenceLayout::kDepthDir) + "/" + name;
    write_depth_png(out_dir / rel, render_depth(scene, t, i), scene.depth_scale);
    index += format_double(t) + " " + rel + "\n";

    DetectionFrame frame{t, {}};
    for (std::size_t a = 0; a < scene.actors.size(); ++a) {
      seq.actors[a].push_back({t, Pose::from_translation(scene.actors[a].position_at(t))});
      auto det = gt_detection(scene.actors[a], t, pose, k);
      if (!det) continue;
      if (scene.detection_jitter > 0.0) {
        det->x_ul += scene.detection_jitter * jitter(jitter_rng);
        det->y_ul += scene.detection_jitter * jitter(jitter_rng);
        det->x_lr += scene.detection_jitter * jitter(jitter_rng);
        det->y_lr += scene.detection_jitter * jitter(jitter_rng);
        det->x_ul = std::clamp(det->x_ul, 0.0, static_cast<double>(k.width));
        det->x_lr = std::clamp(det->x_lr, 0.0, static_cast<double>(k.width));
        det->y_ul = std::clamp(det->y_ul, 0.0, static_cast<double>(k.height));
        det->y_lr = std::clamp(det->y_lr, 0.0, static_cast<double>(k.height));
        if (!det->well_formed()) continue;
      }
      frame.detections.push_back(*det);
    }
    if (!frame.detections.empty()) detections.push_back(std::move(frame));
  }

  write_text_file(out_dir / SequenceLayout::kDepthIndex, index);
  write_trajectory(out_dir / SequenceLayout::kGroundTruth, seq.camera);
  write_detections(out_dir / SequenceLayout::kDetections, detections);
  for (std::size_t a = 0; a < seq.actors.size(); ++a) {
    write_trajectory(out_dir / SequenceLayout::actor_file(a), seq.actors[a]);
  }

  json meta;
  meta["depth_scale"] = scene.depth_scale;
  meta["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx},
                        {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
  meta["seed"] = scene.seed;
  meta["noise_sigma"] = scene.noise_sigma;
  meta["rate"] = scene.rate;
  meta["frames"] = seq.frames;
  meta["actors"] = scene.actors.size();
  write_text_file(out_dir / SequenceLayout::kMetadata, meta.dump(2) + "\n");
  return seq;
}

}  // namespace dbslam
