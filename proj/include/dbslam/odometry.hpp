#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dbslam/geometry.hpp"
#include "dbslam/image.hpp"

namespace dbslam {

struct OdometryConfig {
  int pyramid_levels = 3;
  int max_iterations = 10;        // per level
  double convergence_eps = 1e-6;  // twist step norm
  double dense_weight = 1.0;      // scales the dense term; the only term present
  double huber_delta = 0.05;      // meters
  double max_correspondence_distance = 0.1;  // meters, point-to-point gate
  double discontinuity = 0.1;     // meters, neighbor jump that invalidates a normal
  int normal_radius = 2;          // pixels, stencil and smoothing radius for normals
  std::size_t min_valid_pixels = 1000;

  void validate() const;
};

struct OdometryReport {
  Pose pose;  // maps current-frame points into the previous camera frame
  int iterations = 0;
  double residual_rms = 0.0;  // meters, over inlier correspondences at the final pose
  std::size_t inliers = 0;
  bool diverged = false;
  /// Mean robust cost of every accepted iterate, coarse to fine. Non-increasing per level.
  std::vector<std::vector<double>> accepted_costs;
};

/// Source point (current frame) paired with a target point and unit normal (previous frame).
struct Correspondence {
  Vec3 source;
  Vec3 target;
  Vec3 normal;
};

struct Linearization {
  Eigen::VectorXd residuals;                  // n_i . (exp(xi) p_i - q_i)
  Eigen::Matrix<double, Eigen::Dynamic, 6> jacobian;  // d residual / d xi
  std::vector<std::size_t> kept;              // indices of correspondences used
};

/// Point-to-plane residuals and their exact Jacobian with respect to the twist. Pairs whose
/// normal is not unit length (within 1e-6) or not finite are dropped.
Linearization residual_and_jacobian(std::span<const Correspondence> pairs, const Vec6& twist);

/// Huber IRLS weight for residual r.
double huber_weight(double r, double delta);

/// Depth pyramid with per-level vertex and normal maps, reusable across frame pairs.
class OdometryFrame {
 public:
  struct Level {
    Intrinsics intrinsics;
    DepthImage depth;
    std::vector<Eigen::Vector3f> vertices;  // zero where depth is invalid
    std::vector<Eigen::Vector3f> normals;   // zero where undefined
  };

  OdometryFrame(const DepthImage& depth, const Intrinsics& k, const OdometryConfig& cfg);

  [[nodiscard]] const std::vector<Level>& levels() const { return levels_; }
  [[nodiscard]] std::size_t valid_pixels() const { return valid_; }

 private:
  std::vector<Level> levels_;
  std::size_t valid_ = 0;
};

/// 2x downsampling that averages the valid pixels of each 2x2 block lying within
/// `discontinuity` of the block's nearest valid depth.
DepthImage downsample_depth(const DepthImage& depth, double discontinuity);

/// Relative pose of `curr` with respect to `prev` by point-to-plane ICP with projective
/// association, coarse to fine. Throws NumericalError if either frame has fewer than
/// cfg.min_valid_pixels valid pixels.
OdometryReport estimate_pose(const DepthImage& prev, const DepthImage& curr, const Intrinsics& k,
                             const Pose& init, const OdometryConfig& cfg);
OdometryReport estimate_pose(const OdometryFrame& prev, const OdometryFrame& curr,
                             const Pose& init, const OdometryConfig& cfg);

}  // namespace dbslam
