#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dbslam {

/// Dense metric depth map in row-major order; 0 marks an invalid or removed pixel.
class DepthImage {
 public:
  DepthImage() = default;
  DepthImage(int width, int height, float fill = 0.0f);
  /// Throws InvalidInput if the size mismatches or a value is negative or non-finite.
  DepthImage(int width, int height, std::vector<float> data);

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] bool empty() const { return data_.empty(); }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  [[nodiscard]] float operator()(int u, int v) const {
    return data_[static_cast<std::size_t>(v) * width_ + u];
  }
  float& operator()(int u, int v) { return data_[static_cast<std::size_t>(v) * width_ + u]; }

  [[nodiscard]] std::span<const float> data() const { return data_; }
  [[nodiscard]] std::span<float> data() { return data_; }
  [[nodiscard]] const float* row(int v) const { return data_.data() + static_cast<std::size_t>(v) * width_; }
  float* row(int v) { return data_.data() + static_cast<std::size_t>(v) * width_; }

  [[nodiscard]] std::size_t valid_count() const;

  friend bool operator==(const DepthImage&, const DepthImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// Half-open integer pixel rectangle [u0, u1) x [v0, v1).
struct PixelRect {
  int u0 = 0;
  int v0 = 0;
  int u1 = 0;
  int v1 = 0;

  [[nodiscard]] bool empty() const { return u0 >= u1 || v0 >= v1; }
  [[nodiscard]] int width() const { return u1 - u0; }
  [[nodiscard]] int height() const { return v1 - v0; }
  [[nodiscard]] bool contains(int u, int v) const { return u >= u0 && u < u1 && v >= v0 && v < v1; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Axis-aligned 2D detection box in continuous pixel coordinates, plus detector confidence.
///
/// Pixel (u, v) belongs to the box iff x_ul <= u < x_lr and y_ul <= v < y_lr.
struct Detection {
  double x_ul = 0.0;
  double y_ul = 0.0;
  double x_lr = 0.0;
  double y_lr = 0.0;
  double confidence = 1.0;

  [[nodiscard]] bool well_formed() const;
  [[nodiscard]] bool contains(int u, int v) const {
    return u >= x_ul && u < x_lr && v >= y_ul && v < y_lr;
  }
  /// Pixels covered by the box, clipped to a width x height image.
  [[nodiscard]] PixelRect pixels(int width, int height) const;
  [[nodiscard]] double center_u() const { return 0.5 * (x_ul + x_lr); }
  [[nodiscard]] double center_v() const { return 0.5 * (y_ul + y_lr); }

  friend bool operator==(const Detection&, const Detection&) = default;
};

}  // namespace dbslam
