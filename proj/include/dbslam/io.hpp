#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dbslam/evaluation.hpp"
#include "dbslam/image.hpp"
#include "dbslam/mapping.hpp"
#include "dbslam/placement.hpp"

namespace dbslam {

namespace fs = std::filesystem;

/// 8-bit RGB image, carried through unchanged.
struct ColorImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major RGB triplets
};

struct FrameBundle {
  double timestamp = 0.0;
  DepthImage depth;
  std::optional<ColorImage> color;
  std::vector<Detection> detections;
};

/// Formats a double with the shortest representation that parses back to the same value.
std::string format_double(double value);

// 16-bit grayscale and 8-bit RGB PNG.
std::vector<std::uint16_t> read_png16(const fs::path& path, int& width, int& height);
void write_png16(const fs::path& path, int width, int height, const std::vector<std::uint16_t>& data);
ColorImage read_png_rgb(const fs::path& path);

/// raw / depth_scale; raw 0 stays 0.
DepthImage depth_from_raw(int width, int height, const std::vector<std::uint16_t>& raw,
                          double depth_scale);
/// round(depth * depth_scale); depths that do not fit in 16 bits become 0 (invalid).
std::vector<std::uint16_t> depth_to_raw(const DepthImage& depth, double depth_scale);
/// depth_from_raw(depth_to_raw(depth)): the values a depth PNG round-trip yields.
DepthImage quantize_depth(const DepthImage& depth, double depth_scale);

DepthImage read_depth_png(const fs::path& path, double depth_scale);
void write_depth_png(const fs::path& path, const DepthImage& depth, double depth_scale);

struct IndexEntry {
  double timestamp = 0.0;
  std::string path;
};

/// `timestamp relative/path` lines; '#' comments. Throws DataError with the line number on a
/// malformed line or non-increasing timestamps.
std::vector<IndexEntry> read_index_file(const fs::path& path);

/// Streams frames of a TUM-style directory: `depth.txt` is required; `rgb.txt`, when present,
/// supplies the color image closest in time (within 0.02 s).
class TumSequenceReader {
 public:
  TumSequenceReader(const fs::path& dir, double depth_scale = 5000.0);

  /// Next frame in timestamp order, or nullopt at the end.
  std::optional<FrameBundle> next();
  [[nodiscard]] std::size_t size() const { return depth_.size(); }

 private:
  fs::path dir_;
  double depth_scale_;
  std::vector<IndexEntry> depth_;
  std::vector<IndexEntry> rgb_;
  std::size_t cursor_ = 0;
};

std::vector<FrameBundle> read_tum_sequence(const fs::path& dir, double depth_scale = 5000.0);

struct DetectionFrame {
  double timestamp = 0.0;
  std::vector<Detection> detections;
};

/// Records `timestamp x_ul y_ul x_lr y_lr confidence`, grouped by timestamp in order of first
/// appearance. Throws DataError (with line number) on malformed or inverted boxes.
std::vector<DetectionFrame> read_detections(const fs::path& path);
std::vector<DetectionFrame> parse_detections(const std::string& text);
void write_detections(const fs::path& path, const std::vector<DetectionFrame>& frames);

/// TUM trajectory lines `timestamp tx ty tz qx qy qz qw`. Quaternions within 1e-3 of unit
/// norm are renormalized; others are rejected.
Trajectory read_trajectory(const fs::path& path);
Trajectory parse_trajectory(const std::string& text);
void write_trajectory(const fs::path& path, const Trajectory& trajectory);
std::string format_trajectory(const Trajectory& trajectory);

/// Binary little-endian PLY, float32 x/y/z plus uchar red/green/blue when colored.
void write_ply(const fs::path& path, const PointCloud& cloud);
PointCloud read_ply(const fs::path& path);

/// OBJ subset: `v x y z` and triangular `f a b c` (1-based; `a/b/c` forms accepted).
void write_obj(const fs::path& path, const Mesh& mesh);
Mesh read_obj(const fs::path& path);

/// `key = value` lines with '#' comments.
std::map<std::string, std::string> read_key_values(const fs::path& path);
std::map<std::string, std::string> parse_key_values(const std::string& text);

std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, const std::string& text);

}  // namespace dbslam
