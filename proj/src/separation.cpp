#include "dbslam/separation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dbslam/error.hpp"

namespace dbslam {

void FilterConfig::validate() const {
  if (!(lambda >= 1.0)) throw InvalidInput("filter: lambda must be >= 1");
  if (!(bin_width > 0.0)) throw InvalidInput("filter: bin_width must be positive");
  if (!(bg_margin >= 0.0) || !(human_margin >= 0.0)) {
    throw InvalidInput("filter: margins must be non-negative");
  }
}

std::vector<Detection> filter_detections(std::span<const Detection> raw, double threshold,
                                         int width, int height) {
  std::vector<Detection> out;
  out.reserve(raw.size());
  for (const Detection& d : raw) {
    if (!d.well_formed() || !(d.confidence > threshold)) continue;
    Detection c = d;
    c.x_ul = std::clamp(c.x_ul, 0.0, static_cast<double>(width));
    c.x_lr = std::clamp(c.x_lr, 0.0, static_cast<double>(width));
    c.y_ul = std::clamp(c.y_ul, 0.0, static_cast<double>(height));
    c.y_lr = std::clamp(c.y_lr, 0.0, static_cast<double>(height));
    if (!(c.x_ul < c.x_lr && c.y_ul < c.y_lr)) continue;
    out.push_back(c);
  }
  return out;
}

SeparationResult scene_separation(const DepthImage& depth, std::span<const Detection> dets) {
  SeparationResult sep;
  sep.background = depth;
  sep.parts.resize(dets.size());

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });

  // Moving values out of the background in priority order hands each pixel to the first
  // box that claims it; later boxes see 0 there.
  for (const std::size_t i : order) {
    HumanPart& part = sep.parts[i];
    part.detection = dets[i];
    part.rect = dets[i].pixels(depth.width(), depth.height());
    part.depth = DepthImage(part.rect.width() > 0 ? part.rect.width() : 0,
                            part.rect.height() > 0 ? part.rect.height() : 0);
    if (part.rect.empty()) continue;
    for (int v = part.rect.v0; v < part.rect.v1; ++v) {
      float* bg = sep.background.row(v);
      float* dst = part.depth.row(v - part.rect.v0);
      for (int u = part.rect.u0; u < part.rect.u1; ++u) {
        dst[u - part.rect.u0] = bg[u];
        bg[u] = 0.0f;
      }
    }
  }
  return sep;
}

DepthInterval compute_histogram(std::span<const float> region, double bin_width) {
  if (!(bin_width > 0.0)) throw InvalidInput("compute_histogram: bin_width must be positive");
  std::vector<std::size_t> counts;
  for (const float d : region) {
    if (!(d > 0.0f)) continue;
    const auto bin = static_cast<std::size_t>(std::floor(static_cast<double>(d) / bin_width));
    if (bin >= counts.size()) counts.resize(bin + 1, 0);
    ++counts[bin];
  }
  if (counts.empty()) throw InvalidInput("compute_histogram: region has no valid depth");

  const auto mode_it = std::max_element(counts.begin(), counts.end());
  const std::size_t mode = static_cast<std::size_t>(mode_it - counts.begin());
  // count >= mode / 2, kept in integers.
  auto strong = [&](std::size_t i) { return 2 * counts[i] >= *mode_it; };
  std::size_t first = mode;
  while (first > 0 && strong(first - 1)) --first;
  std::size_t last = mode;
  while (last + 1 < counts.size() && strong(last + 1)) ++last;
  return {static_cast<double>(first) * bin_width, static_cast<double>(last + 1) * bin_width};
}

void compute_intervals(SeparationResult& sep, const DepthImage& input, double bin_width) {
  for (HumanPart& part : sep.parts) {
    part.interval.reset();
    if (part.depth.valid_count() > 0) part.interval = compute_histogram(part.depth.data(), bin_width);
  }
  sep.background_interval.reset();
  if (input.valid_count() > 0) sep.background_interval = compute_histogram(input.data(), bin_width);
}

Detection magnify_range(const Detection& box, double lambda, int width, int height) {
  if (!(lambda >= 1.0)) throw InvalidInput("magnify_range: lambda must be >= 1");
  const double cu = box.center_u();
  const double cv = box.center_v();
  const double hw = 0.5 * (box.x_lr - box.x_ul) * lambda;
  const double hh = 0.5 * (box.y_lr - box.y_ul) * lambda;
  Detection out = box;
  if (lambda != 1.0) {
    out.x_ul = cu - hw;
    out.x_lr = cu + hw;
    out.y_ul = cv - hh;
    out.y_lr = cv + hh;
  }
  out.x_ul = std::clamp(out.x_ul, 0.0, static_cast<double>(width));
  out.x_lr = std::clamp(out.x_lr, 0.0, static_cast<double>(width));
  out.y_ul = std::clamp(out.y_ul, 0.0, static_cast<double>(height));
  out.y_lr = std::clamp(out.y_lr, 0.0, static_cast<double>(height));
  return out;
}

void filter_outliers(SeparationResult& sep, double lambda, double bg_margin, double human_margin) {
  if (!sep.background_interval) return;  // frame has no valid depth at all
  const DepthInterval bg_band = *sep.background_interval;
  DepthImage& bg = sep.background;

  for (HumanPart& part : sep.parts) {
    const Detection wide = magnify_range(part.detection, lambda, bg.width(), bg.height());
    const PixelRect r = wide.pixels(bg.width(), bg.height());
    const PixelRect& own = part.rect;
    for (int v = r.v0; v < r.v1; ++v) {
      float* brow = bg.row(v);
      const bool row_in_part = part.interval && v >= own.v0 && v < own.v1;
      float* hrow = row_in_part ? part.depth.row(v - own.v0) : nullptr;
      for (int u = r.u0; u < r.u1; ++u) {
        const float b = brow[u];
        if (b != 0.0f && !bg_band.within(b, bg_margin)) brow[u] = 0.0f;
        if (hrow == nullptr || u < own.u0 || u >= own.u1) continue;
        float& h = hrow[u - own.u0];
        if (h != 0.0f && !part.interval->within(h, human_margin)) {
          brow[u] = bg_band.within(h, bg_margin) ? h : 0.0f;
          h = 0.0f;
        }
      }
    }
  }
}

SeparationResult dual_bbox_filter(const DepthImage& depth, std::span<const Detection> raw,
                                  const FilterConfig& cfg) {
  cfg.validate();
  const std::vector<Detection> dets =
      filter_detections(raw, cfg.confidence_threshold, depth.width(), depth.height());
  SeparationResult sep = scene_separation(depth, dets);
  compute_intervals(sep, depth, cfg.bin_width);
  filter_outliers(sep, cfg.lambda, cfg.bg_margin, cfg.human_margin);
  return sep;
}

}  // namespace dbslam
