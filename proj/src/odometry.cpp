#include "dbslam/odometry.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <optional>

#include "dbslam/error.hpp"

namespace dbslam {

void OdometryConfig::validate() const {
  if (pyramid_levels < 1) throw InvalidInput("odometry: pyramid_levels must be >= 1");
  if (max_iterations < 1) throw InvalidInput("odometry: max_iterations must be >= 1");
  if (!(convergence_eps > 0.0)) throw InvalidInput("odometry: convergence_eps must be positive");
  if (!(dense_weight > 0.0)) throw InvalidInput("odometry: dense_weight must be positive");
  if (!(huber_delta > 0.0)) throw InvalidInput("odometry: huber_delta must be positive");
  if (!(max_correspondence_distance > 0.0)) {
    throw InvalidInput("odometry: max_correspondence_distance must be positive");
  }
  if (!(discontinuity > 0.0)) throw InvalidInput("odometry: discontinuity must be positive");
  if (normal_radius < 1) throw InvalidInput("odometry: normal_radius must be >= 1");
}

double huber_weight(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

namespace {

double huber_cost(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

// Row of d(n . (x - q)) for a left perturbation (translation, rotation) of x.
Vec6 perturbation_row(const Vec3& x, const Vec3& n) {
  Vec6 row;
  row.head<3>() = n;
  row.tail<3>() = x.cross(n);
  return row;
}

}  // namespace

Linearization residual_and_jacobian(std::span<const Correspondence> pairs, const Vec6& twist) {
  const Pose t = se3_exp(twist);
  const Mat6 jl = se3_left_jacobian(twist);
  Linearization out;
  out.kept.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Vec3& n = pairs[i].normal;
    if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-6) continue;
    out.kept.push_back(i);
  }
  out.residuals.resize(static_cast<Eigen::Index>(out.kept.size()));
  out.jacobian.resize(static_cast<Eigen::Index>(out.kept.size()), 6);
  for (std::size_t k = 0; k < out.kept.size(); ++k) {
    const Correspondence& c = pairs[out.kept[k]];
    const Vec3 x = t * c.source;
    const auto row = static_cast<Eigen::Index>(k);
    out.residuals(row) = c.normal.dot(x - c.target);
    out.jacobian.row(row) = perturbation_row(x, c.normal).transpose() * jl;
  }
  return out;
}

DepthImage downsample_depth(const DepthImage& depth, double discontinuity) {
  const int w = depth.width() / 2;
  const int h = depth.height() / 2;
  DepthImage out(w, h);
  for (int v = 0; v < h; ++v) {
    const float* r0 = depth.row(2 * v);
    const float* r1 = depth.row(2 * v + 1);
    float* dst = out.row(v);
    for (int u = 0; u < w; ++u) {
      const float block[4] = {r0[2 * u], r0[2 * u + 1], r1[2 * u], r1[2 * u + 1]};
      float nearest = 0.0f;
      for (const float d : block) {
        if (d > 0.0f && (nearest == 0.0f || d < nearest)) nearest = d;
      }
      if (nearest == 0.0f) continue;
      float sum = 0.0f;
      int n = 0;
      for (const float d : block) {
        if (d > 0.0f && d - nearest <= discontinuity) {
          sum += d;
          ++n;
        }
      }
      dst[u] = sum / static_cast<float>(n);
    }
  }
  return out;
}

namespace {

// Number of steps, up to r, that can be taken from each pixel in both directions along one
// axis without crossing an invalid pixel or a depth jump larger than `range`.
std::vector<int> symmetric_reach(const DepthImage& d, int r, float range, bool along_rows) {
  const int w = d.width();
  const int h = d.height();
  const int du = along_rows ? 1 : 0;
  const int dv = along_rows ? 0 : 1;
  auto continuous = [&](int u0, int v0, int u1, int v1) {
    if (u1 < 0 || v1 < 0 || u1 >= w || v1 >= h) return false;
    const float a = d(u0, v0);
    const float b = d(u1, v1);
    return b > 0.0f && std::abs(a - b) <= range;
  };
  std::vector<int> reach(d.size(), 0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (d(u, v) <= 0.0f) continue;
      int k = 0;
      while (k < r && continuous(u + k * du, v + k * dv, u + (k + 1) * du, v + (k + 1) * dv) &&
             continuous(u - k * du, v - k * dv, u - (k + 1) * du, v - (k + 1) * dv)) {
        ++k;
      }
      reach[static_cast<std::size_t>(v) * w + u] = k;
    }
  }
  return reach;
}

// Edge-aware smoothing in two separable passes over inverse depth, each averaging a window
// that is symmetric about the center and stops at the first discontinuity on either side.
// Inverse depth is affine in the pixel coordinates over a plane, and a symmetric mean of an
// affine function equals its center value, so planes stay exactly planar under this filter.
std::vector<float> smooth_depth(const DepthImage& d, const std::vector<int>& reach_u,
                                const std::vector<int>& reach_v) {
  const int w = d.width();
  const int h = d.height();
  std::vector<float> row_mean(d.size(), 0.0f);
  for (int v = 0; v < h; ++v) {
    const float* row = d.row(v);
    for (int u = 0; u < w; ++u) {
      if (row[u] <= 0.0f) continue;
      const int k = reach_u[static_cast<std::size_t>(v) * w + u];
      float sum = 0.0f;
      for (int x = u - k; x <= u + k; ++x) sum += 1.0f / row[x];
      row_mean[static_cast<std::size_t>(v) * w + u] = sum / static_cast<float>(2 * k + 1);
    }
  }
  std::vector<float> out(d.size(), 0.0f);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (d(u, v) <= 0.0f) continue;
      const int k = reach_v[static_cast<std::size_t>(v) * w + u];
      float sum = 0.0f;
      for (int y = v - k; y <= v + k; ++y) sum += row_mean[static_cast<std::size_t>(y) * w + u];
      out[static_cast<std::size_t>(v) * w + u] = static_cast<float>(2 * k + 1) / sum;
    }
  }
  return out;
}

// Sine of the largest angle between the two halves of a normal stencil.
constexpr float kMaxBend = 0.1f;

void fill_vertices_and_normals(OdometryFrame::Level& level, double discontinuity, int normal_radius) {
  const Intrinsics& k = level.intrinsics;
  const DepthImage& d = level.depth;
  const int w = d.width();
  const int h = d.height();
  level.vertices.assign(d.size(), Eigen::Vector3f::Zero());
  level.normals.assign(d.size(), Eigen::Vector3f::Zero());
  const float inv_fx = static_cast<float>(1.0 / k.fx);
  const float inv_fy = static_cast<float>(1.0 / k.fy);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const float z = d(u, v);
      if (z <= 0.0f) continue;
      level.vertices[static_cast<std::size_t>(v) * w + u] =
          {(static_cast<float>(u) - static_cast<float>(k.cx)) * inv_fx * z,
           (static_cast<float>(v) - static_cast<float>(k.cy)) * inv_fy * z, z};
    }
  }
  // Normals come from an edge-aware smoothed copy of the depth with a stencil of `normal_radius`
  // pixels. Per-pixel central differences on raw depth are dominated by sensor noise, and
  // noisy target normals bias the point-to-plane solution along the surface tangents.
  const auto disc = static_cast<float>(discontinuity);
  const int r = normal_radius;
  const std::vector<int> reach_u = symmetric_reach(d, r, disc, true);
  const std::vector<int> reach_v = symmetric_reach(d, r, disc, false);
  const std::vector<float> smooth = smooth_depth(d, reach_u, reach_v);
  auto point = [&](int u, int v) {
    const float z = smooth[static_cast<std::size_t>(v) * w + u];
    return Eigen::Vector3f((static_cast<float>(u) - static_cast<float>(k.cx)) * inv_fx * z,
                           (static_cast<float>(v) - static_cast<float>(k.cy)) * inv_fy * z, z);
  };
  auto bent = [](const Eigen::Vector3f& a, const Eigen::Vector3f& b) {
    return a.cross(b).norm() > kMaxBend * a.norm() * b.norm() || a.dot(b) <= 0.0f;
  };
  for (int v = r; v + r < h; ++v) {
    for (int u = r; u + r < w; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * w + u;
      // The stencil must be continuous along both axes.
      if (reach_u[i] < r || reach_v[i] < r) continue;
      // Rows and columns of a plane back-project to straight lines. A bend in the stencil
      // means it straddles a crease, where the smoothed normal belongs to neither surface.
      const Eigen::Vector3f c = point(u, v);
      if (bent(c - point(u - r, v), point(u + r, v) - c) ||
          bent(c - point(u, v - r), point(u, v + r) - c)) {
        continue;
      }
      const Eigen::Vector3f du = point(u + r, v) - point(u - r, v);
      const Eigen::Vector3f dv = point(u, v + r) - point(u, v - r);
      Eigen::Vector3f n = du.cross(dv);
      const float norm = n.norm();
      if (!(norm > 0.0f)) continue;
      n /= norm;
      if (n.dot(level.vertices[i]) > 0.0f) n = -n;
      level.normals[i] = n;
    }
  }
}

struct NormalEquations {
  Mat6 h = Mat6::Zero();
  Vec6 g = Vec6::Zero();
  double cost = 0.0;
  double squared = 0.0;
  std::size_t count = 0;

  [[nodiscard]] double mean_cost() const { return count ? cost / static_cast<double>(count) : 0.0; }
  [[nodiscard]] double rms() const {
    return count ? std::sqrt(squared / static_cast<double>(count)) : 0.0;
  }
};

// Projective association of every valid source pixel into the target at pose t, with the
// Gauss-Newton system expressed for a left perturbation of t.
NormalEquations accumulate(const OdometryFrame::Level& src, const OdometryFrame::Level& dst,
                           const Pose& t, const OdometryConfig& cfg) {
  NormalEquations ne;
  const Eigen::Matrix3f r = t.rotation().cast<float>();
  const Eigen::Vector3f tr = t.translation().cast<float>();
  const Intrinsics& k = dst.intrinsics;
  const auto fx = static_cast<float>(k.fx);
  const auto fy = static_cast<float>(k.fy);
  const auto cx = static_cast<float>(k.cx);
  const auto cy = static_cast<float>(k.cy);
  const int w = dst.depth.width();
  const int h = dst.depth.height();
  const auto max_dist2 =
      static_cast<float>(cfg.max_correspondence_distance * cfg.max_correspondence_distance);
  const double delta = cfg.huber_delta;

  // Each image row is summed in float and then folded into the double totals.
  using Vec6f = Eigen::Matrix<float, 6, 1>;
  using Mat6f = Eigen::Matrix<float, 6, 6>;
  for (int v = 0; v < src.depth.height(); ++v) {
    Mat6f row_h = Mat6f::Zero();
    Vec6f row_g = Vec6f::Zero();
    const std::size_t begin = static_cast<std::size_t>(v) * src.depth.width();
    const std::size_t end = begin + static_cast<std::size_t>(src.depth.width());
    for (std::size_t i = begin; i < end; ++i) {
      const Eigen::Vector3f& p = src.vertices[i];
      if (p.z() <= 0.0f) continue;
      const Eigen::Vector3f x = r * p + tr;
      if (x.z() <= 0.0f) continue;
      const float inv_z = 1.0f / x.z();
      const float pu = fx * x.x() * inv_z + cx;
      const float pv = fy * x.y() * inv_z + cy;
      if (!(pu > -0.5f && pv > -0.5f && pu < w - 0.5f && pv < h - 0.5f)) continue;
      const auto j = static_cast<std::size_t>(static_cast<int>(pv + 0.5f)) * w +
                     static_cast<std::size_t>(static_cast<int>(pu + 0.5f));
      const Eigen::Vector3f& n = dst.normals[j];
      if (n.z() == 0.0f && n.x() == 0.0f && n.y() == 0.0f) continue;
      const Eigen::Vector3f diff = x - dst.vertices[j];
      if (diff.squaredNorm() > max_dist2) continue;
      const float res = n.dot(diff);
      const auto wgt = static_cast<float>(huber_weight(res, delta));
      Vec6f row;
      row << n, x.cross(n);
      const Vec6f weighted = wgt * row;
      row_h.noalias() += weighted * row.transpose();
      row_g += weighted * res;
      ne.cost += huber_cost(res, delta);
      ne.squared += static_cast<double>(res) * res;
      ++ne.count;
    }
    ne.h += row_h.cast<double>();
    ne.g += row_g.cast<double>();
  }
  ne.h *= cfg.dense_weight;
  ne.g *= cfg.dense_weight;
  ne.cost *= cfg.dense_weight;
  return ne;
}

// Relative cost increase treated as noise from re-association rather than a failed step.
constexpr double kInsignificantGrowth = 1e-2;

// Per-point information below which a motion direction counts as unobservable.
constexpr double kDegenerateInformation = 1e-3;

// Gauss-Newton step in twist coordinates: the perturbation Jacobian is chained through the
// left Jacobian of the exponential at the current twist. Directions the geometry does not
// constrain (a corridor seen without floor or ceiling, say) are left out of the step, so
// noise cannot drag the estimate along them; they keep their initial value.
bool solve_step(const NormalEquations& ne, const Vec6& xi, Vec6& step) {
  if (ne.count < 6) return false;
  const Mat6 jl = se3_left_jacobian(xi);
  const Mat6 h = jl.transpose() * ne.h * jl;
  const Vec6 g = jl.transpose() * ne.g;
  // Rotation columns carry a lever arm; rescale them to meters so eigenvalues compare.
  const double trans = h.topLeftCorner<3, 3>().trace();
  const double rot = h.bottomRightCorner<3, 3>().trace();
  if (!(trans > 0.0) || !(rot > 0.0)) return false;
  Vec6 scale;
  scale << Eigen::Vector3d::Ones(), Eigen::Vector3d::Constant(std::sqrt(trans / rot));
  const Mat6 hs = scale.asDiagonal() * h * scale.asDiagonal() / static_cast<double>(ne.count);
  const Vec6 gs = scale.cwiseProduct(g) / static_cast<double>(ne.count);
  const Eigen::SelfAdjointEigenSolver<Mat6> es(hs);
  if (es.info() != Eigen::Success) return false;
  Vec6 ys = Vec6::Zero();
  for (int i = 0; i < 6; ++i) {
    const double lambda = es.eigenvalues()(i);
    if (lambda < kDegenerateInformation) continue;
    const Vec6 v = es.eigenvectors().col(i);
    ys -= v * (v.dot(gs) / lambda);
  }
  step = scale.cwiseProduct(ys);
  return step.allFinite();
}

}  // namespace

OdometryFrame::OdometryFrame(const DepthImage& depth, const Intrinsics& k,
                             const OdometryConfig& cfg) {
  cfg.validate();
  k.validate();
  if (depth.width() != k.width || depth.height() != k.height) {
    throw InvalidInput("odometry: depth image size does not match intrinsics");
  }
  valid_ = depth.valid_count();
  levels_.reserve(static_cast<std::size_t>(cfg.pyramid_levels));
  Level base;
  base.intrinsics = k;
  base.depth = depth;
  levels_.push_back(std::move(base));
  for (int l = 1; l < cfg.pyramid_levels; ++l) {
    const Level& prev = levels_.back();
    if (prev.depth.width() < 8 || prev.depth.height() < 8) break;
    Level next;
    next.intrinsics = prev.intrinsics.half();
    next.depth = downsample_depth(prev.depth, cfg.discontinuity);
    levels_.push_back(std::move(next));
  }
  // Downsampling already averages noise, so the stencil shrinks with the level.
  int radius = cfg.normal_radius;
  for (Level& level : levels_) {
    fill_vertices_and_normals(level, cfg.discontinuity, radius);
    radius = std::max(1, radius / 2);
  }
}

OdometryReport estimate_pose(const DepthImage& prev, const DepthImage& curr, const Intrinsics& k,
                             const Pose& init, const OdometryConfig& cfg) {
  return estimate_pose(OdometryFrame(prev, k, cfg), OdometryFrame(curr, k, cfg), init, cfg);
}

OdometryReport estimate_pose(const OdometryFrame& prev, const OdometryFrame& curr,
                             const Pose& init, const OdometryConfig& cfg) {
  cfg.validate();
  if (prev.valid_pixels() < cfg.min_valid_pixels || curr.valid_pixels() < cfg.min_valid_pixels) {
    throw NumericalError("odometry: insufficient valid pixels");
  }
  const std::size_t levels = std::min(prev.levels().size(), curr.levels().size());

  OdometryReport report;
  Vec6 xi = se3_log(init);
  std::optional<NormalEquations> finest;  // evaluation at the final pose, when available
  for (std::size_t l = levels; l-- > 0;) {
    const auto& src = curr.levels()[l];
    const auto& dst = prev.levels()[l];
    std::vector<double> costs;
    NormalEquations current = accumulate(src, dst, se3_exp(xi), cfg);
    ++report.iterations;
    Vec6 step;
    if (!solve_step(current, xi, step)) {
      report.accepted_costs.push_back(std::move(costs));
      continue;
    }
    costs.push_back(current.mean_cost());
    int growth = 0;
    for (int it = 1; it < cfg.max_iterations; ++it) {
      if (step.norm() < cfg.convergence_eps) break;
      const Vec6 candidate_xi = xi + step;
      NormalEquations candidate = accumulate(src, dst, se3_exp(candidate_xi), cfg);
      ++report.iterations;
      if (candidate.count >= 6 && candidate.mean_cost() <= current.mean_cost()) {
        xi = candidate_xi;
        current = candidate;
        costs.push_back(current.mean_cost());
        growth = 0;
        if (!solve_step(current, xi, step)) break;
      } else if (candidate.count >= 6 &&
                 candidate.mean_cost() <= current.mean_cost() * (1.0 + kInsignificantGrowth)) {
        // Growth at the noise floor of re-association: shorten the step, no divergence count.
        step *= 0.5;
      } else {
        if (++growth >= 3) {
          // Coarse levels only seed the finer ones; a stall there ends that level.
          report.diverged = l == 0;
          break;
        }
        step *= 0.5;
      }
    }
    report.accepted_costs.push_back(std::move(costs));
    if (l == 0) finest = current;
    if (report.diverged) break;
  }

  report.pose = se3_exp(xi);
  const NormalEquations final_eval =
      finest ? *finest : accumulate(curr.levels().front(), prev.levels().front(), report.pose, cfg);
  report.residual_rms = final_eval.rms();
  report.inliers = final_eval.count;
  return report;
}

}  // namespace dbslam
