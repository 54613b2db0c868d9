#include "dbslam/evaluation.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <tuple>

#include "dbslam/error.hpp"

namespace dbslam {

void validate_trajectory(const Trajectory& trajectory) {
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    if (!(trajectory[i].timestamp > trajectory[i - 1].timestamp)) {
      throw InvalidInput("trajectory: timestamps must be strictly increasing");
    }
  }
}

std::vector<PosePair> associate_by_time(const Trajectory& est, const Trajectory& gt,
                                        double max_dt) {
  if (est.empty() || gt.empty()) throw DataError("associate: empty trajectory");
  if (!(max_dt >= 0.0)) throw InvalidInput("associate: max_dt must be non-negative");
  validate_trajectory(est);
  validate_trajectory(gt);

  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  auto by_time = [](const StampedPose& p, double t) { return p.timestamp < t; };
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est[i].timestamp;
    auto it = std::lower_bound(gt.begin(), gt.end(), t - max_dt, by_time);
    for (; it != gt.end() && it->timestamp <= t + max_dt; ++it) {
      const double dt = std::abs(it->timestamp - t);
      if (dt <= max_dt) {
        candidates.emplace_back(dt, i, static_cast<std::size_t>(it - gt.begin()));
      }
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<bool> est_used(est.size(), false);
  std::vector<bool> gt_used(gt.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  for (const auto& [dt, i, j] : candidates) {
    if (est_used[i] || gt_used[j]) continue;
    est_used[i] = gt_used[j] = true;
    chosen.emplace_back(i, j);
  }
  if (chosen.empty()) throw DataError("associate: trajectories have no temporal overlap");
  std::sort(chosen.begin(), chosen.end());

  std::vector<PosePair> out;
  out.reserve(chosen.size());
  for (const auto& [i, j] : chosen) {
    out.push_back({est[i].timestamp, gt[j].timestamp, est[i].pose, gt[j].pose});
  }
  return out;
}

Pose align_rigid(std::span<const PosePair> pairs) {
  if (pairs.size() < 3) throw NumericalError("align_rigid: need at least 3 pairs");
  const double n = static_cast<double>(pairs.size());
  Vec3 mu_est = Vec3::Zero();
  Vec3 mu_gt = Vec3::Zero();
  for (const PosePair& p : pairs) {
    mu_est += p.est.translation();
    mu_gt += p.gt.translation();
  }
  mu_est /= n;
  mu_gt /= n;

  Mat3 cross = Mat3::Zero();
  Mat3 spread = Mat3::Zero();
  for (const PosePair& p : pairs) {
    const Vec3 e = p.est.translation() - mu_est;
    cross += (p.gt.translation() - mu_gt) * e.transpose();
    spread += e * e.transpose();
  }
  Eigen::JacobiSVD<Mat3> spread_svd(spread);
  const Vec3 sv = spread_svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw NumericalError("align_rigid: estimate positions are degenerate (collinear)");
  }

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
  return {orthonormalize(r), mu_gt - r * mu_est};
}

std::vector<double> position_errors(std::span<const PosePair> pairs, const Pose& alignment) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const PosePair& p : pairs) {
    out.push_back((p.gt.translation() - alignment * p.est.translation()).norm());
  }
  return out;
}

double ate_rmse(std::span<const PosePair> pairs, const Pose& alignment) {
  if (pairs.empty()) throw InvalidInput("ate_rmse: no pairs");
  double sum = 0.0;
  for (const double e : position_errors(pairs, alignment)) sum += e * e;
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

double trajectory_length(const Trajectory& trajectory) {
  double len = 0.0;
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    len += (trajectory[i].pose.translation() - trajectory[i - 1].pose.translation()).norm();
  }
  return len;
}

}  // namespace dbslam
