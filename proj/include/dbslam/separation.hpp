#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dbslam/image.hpp"

namespace dbslam {

/// Depth range [lo, hi] in meters.
struct DepthInterval {
  double lo = 0.0;
  double hi = 0.0;

  /// Open-interval membership in (lo - margin, hi + margin).
  [[nodiscard]] bool within(double depth, double margin) const {
    return depth > lo - margin && depth < hi + margin;
  }
  friend bool operator==(const DepthInterval&, const DepthInterval&) = default;
};

/// Depth pixels of one detection, stored as a crop over the box's pixel rectangle.
struct HumanPart {
  Detection detection;
  PixelRect rect;
  DepthImage depth;  // rect.width() x rect.height(); 0 where not owned by this part
  std::optional<DepthInterval> interval;

  /// Value at full-image pixel (u, v); 0 outside the rectangle.
  [[nodiscard]] float at(int u, int v) const {
    return rect.contains(u, v) ? depth(u - rect.u0, v - rect.v0) : 0.0f;
  }
};

struct SeparationResult {
  DepthImage background;
  std::vector<HumanPart> parts;
  /// Principal interval of the whole input frame.
  std::optional<DepthInterval> background_interval;
};

struct FilterConfig {
  double lambda = 1.2;
  double bin_width = 0.2;
  double bg_margin = 0.1;
  double human_margin = 0.2;
  double confidence_threshold = 0.5;

  void validate() const;
};

/// Keeps detections with confidence strictly above `threshold`, clipped to the image.
/// Boxes that are malformed or fall entirely outside the image are dropped.
std::vector<Detection> filter_detections(std::span<const Detection> raw, double threshold,
                                         int width, int height);

/// Splits `depth` into background and one part per detection. A pixel covered by several
/// boxes goes to the highest-confidence box; ties go to the lower index.
SeparationResult scene_separation(const DepthImage& depth, std::span<const Detection> dets);

/// Principal interval of the nonzero values: histogram bins [k*w, (k+1)*w), then the
/// longest contiguous run of bins around the modal bin whose counts are at least half the
/// modal count. Ties for the mode go to the nearer bin. Throws InvalidInput if no value is
/// nonzero or bin_width <= 0.
DepthInterval compute_histogram(std::span<const float> region, double bin_width);

/// Fills part intervals (from each part) and the background interval (from `input`).
/// Parts without valid pixels keep an empty interval.
void compute_intervals(SeparationResult& sep, const DepthImage& input, double bin_width);

/// Scales the box about its center by `lambda` per side and clips it to the image.
/// Throws InvalidInput for lambda < 1.
Detection magnify_range(const Detection& box, double lambda, int width, int height);

/// Outlier filtering inside each lambda-magnified box, in detection order:
///  - a background pixel outside (b_min - bg_margin, b_max + bg_margin) is zeroed;
///  - a human pixel outside (h_min - human_margin, h_max + human_margin) is moved to the
///    background, where it is kept only if it lies inside the background band.
/// Pixels outside every magnified box are untouched.
void filter_outliers(SeparationResult& sep, double lambda, double bg_margin, double human_margin);

/// Full dual-box filter: confidence filtering, separation, intervals, outlier filtering.
SeparationResult dual_bbox_filter(const DepthImage& depth, std::span<const Detection> raw,
                                  const FilterConfig& cfg);

}  // namespace dbslam
