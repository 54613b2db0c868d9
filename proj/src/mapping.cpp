#include "dbslam/mapping.hpp"

#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "dbslam/error.hpp"

namespace dbslam {

void fuse_frame(PointCloud& map, const DepthImage& depth, const Pose& pose, const Intrinsics& k,
                int stride) {
  if (stride < 1) throw InvalidInput("fuse_frame: stride must be >= 1");
  if (depth.width() != k.width || depth.height() != k.height) {
    throw InvalidInput("fuse_frame: depth image size does not match intrinsics");
  }
  for (int v = 0; v < depth.height(); v += stride) {
    const float* row = depth.row(v);
    for (int u = 0; u < depth.width(); u += stride) {
      const double z = row[u];
      if (z <= 0.0) continue;
      const Vec3 p{(u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z};
      map.points.push_back(pose * p);
    }
  }
  if (map.colored()) map.colors.resize(map.points.size(), Rgb{0, 0, 0});
}

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 19349663ULL;
    h ^= static_cast<std::uint64_t>(k.z) * 83492791ULL;
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) throw InvalidInput("voxel_downsample: voxel size must be positive");
  struct Cell {
    Vec3 sum = Vec3::Zero();
    std::array<double, 3> rgb{};
    std::size_t count = 0;
  };
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> index;
  std::vector<Cell> cells;
  index.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const VoxelKey key{static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                       static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                       static_cast<std::int64_t>(std::floor(p.z() / voxel))};
    auto [it, inserted] = index.try_emplace(key, cells.size());
    if (inserted) cells.emplace_back();
    Cell& c = cells[it->second];
    c.sum += p;
    if (cloud.colored()) {
      for (int ch = 0; ch < 3; ++ch) c.rgb[ch] += cloud.colors[i][ch];
    }
    ++c.count;
  }
  PointCloud out;
  out.points.reserve(cells.size());
  if (cloud.colored()) out.colors.reserve(cells.size());
  for (const Cell& c : cells) {
    const double n = static_cast<double>(c.count);
    out.points.push_back(c.count == 1 ? c.sum : Vec3(c.sum / n));
    if (cloud.colored()) {
      out.colors.push_back({static_cast<std::uint8_t>(std::lround(c.rgb[0] / n)),
                            static_cast<std::uint8_t>(std::lround(c.rgb[1] / n)),
                            static_cast<std::uint8_t>(std::lround(c.rgb[2] / n))});
    }
  }
  return out;
}

}  // namespace dbslam
