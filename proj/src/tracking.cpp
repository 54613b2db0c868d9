#include "dbslam/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "dbslam/error.hpp"

namespace dbslam {

void Track::append(double timestamp, const Vec3& position) {
  if (!points.empty() && !(timestamp > points.back().timestamp)) {
    throw InvalidInput("track: timestamps must be strictly increasing");
  }
  points.push_back({timestamp, position});
}

void AssociationConfig::validate() const {
  if (!(gate > 0.0)) throw InvalidInput("association: gate must be positive");
  if (max_misses < 0) throw InvalidInput("association: max_misses must be >= 0");
}

double mean_depth(const DepthImage& part) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const float d : part.data()) {
    if (d > 0.0f) {
      sum += d;
      ++n;
    }
  }
  if (n == 0) throw InvalidInput("mean_depth: part has no valid depth");
  return sum / static_cast<double>(n);
}

Point3H center_point(const Detection& box, double d_m, const Intrinsics& k) {
  if (!(d_m > 0.0) || !std::isfinite(d_m)) throw InvalidInput("center_point: depth must be positive");
  return {(box.x_ul + box.x_lr - 2.0 * k.cx) / (2.0 * k.fx) * d_m,
          (box.y_ul + box.y_lr - 2.0 * k.cy) / (2.0 * k.fy) * d_m, d_m, 1.0};
}

Vec3 to_world(const Point3H& p, const Pose& pose) {
  return pose * p.euclidean();
}

std::vector<std::pair<std::size_t, std::size_t>> greedy_match(std::span<const Vec3> track_positions,
                                                              std::span<const Vec3> observations,
                                                              double gate) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < track_positions.size(); ++i) {
    for (std::size_t j = 0; j < observations.size(); ++j) {
      const double d = (track_positions[i] - observations[j]).norm();
      if (d <= gate) candidates.emplace_back(d, i, j);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<bool> track_used(track_positions.size(), false);
  std::vector<bool> obs_used(observations.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [d, i, j] : candidates) {
    if (track_used[i] || obs_used[j]) continue;
    track_used[i] = true;
    obs_used[j] = true;
    out.emplace_back(i, j);
  }
  return out;
}

TrackStore::TrackStore(AssociationConfig cfg) : cfg_(cfg) { cfg_.validate(); }

AssociationResult TrackStore::associate(double timestamp, std::span<const Vec3> observations) {
  std::vector<Vec3> positions;
  positions.reserve(live_.size());
  for (const Track& t : live_) positions.push_back(t.last_position());

  AssociationResult result;
  std::vector<bool> matched_track(live_.size(), false);
  std::vector<bool> matched_obs(observations.size(), false);
  for (const auto& [ti, oj] : greedy_match(positions, observations, cfg_.gate)) {
    live_[ti].append(timestamp, observations[oj]);
    live_[ti].misses = 0;
    matched_track[ti] = true;
    matched_obs[oj] = true;
    result.matches.emplace_back(live_[ti].id, oj);
  }

  std::vector<Track> still_live;
  still_live.reserve(live_.size() + observations.size());
  for (std::size_t i = 0; i < live_.size(); ++i) {
    Track& t = live_[i];
    if (!matched_track[i] && ++t.misses > cfg_.max_misses) {
      result.terminated.push_back(t.id);
      finished_.push_back(std::move(t));
      continue;
    }
    still_live.push_back(std::move(t));
  }
  for (std::size_t j = 0; j < observations.size(); ++j) {
    if (matched_obs[j]) continue;
    Track t;
    t.id = next_id_++;
    t.append(timestamp, observations[j]);
    result.spawned.push_back(t.id);
    still_live.push_back(std::move(t));
  }
  live_ = std::move(still_live);
  return result;
}

std::vector<Track> TrackStore::all() const {
  std::vector<Track> out = finished_;
  out.insert(out.end(), live_.begin(), live_.end());
  std::sort(out.begin(), out.end(), [](const Track& a, const Track& b) { return a.id < b.id; });
  return out;
}

}  // namespace dbslam
