#include "dbslam/image.hpp"

#include <algorithm>
#include <cmath>

#include "dbslam/error.hpp"

namespace dbslam {

DepthImage::DepthImage(int width, int height, float fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) throw InvalidInput("depth image: negative size");
  if (!(fill >= 0.0f) || !std::isfinite(fill)) throw InvalidInput("depth image: invalid fill value");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

DepthImage::DepthImage(int width, int height, std::vector<float> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0) throw InvalidInput("depth image: negative size");
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidInput("depth image: data length does not match width * height");
  }
  for (const float d : data_) {
    if (!(d >= 0.0f) || !std::isfinite(d)) {
      throw InvalidInput("depth image: values must be finite and non-negative");
    }
  }
}

std::size_t DepthImage::valid_count() const {
  return static_cast<std::size_t>(
      std::count_if(data_.begin(), data_.end(), [](float d) { return d > 0.0f; }));
}

bool Detection::well_formed() const {
  return std::isfinite(x_ul) && std::isfinite(y_ul) && std::isfinite(x_lr) &&
         std::isfinite(y_lr) && std::isfinite(confidence) && x_ul < x_lr && y_ul < y_lr;
}

PixelRect Detection::pixels(int width, int height) const {
  auto lo = [](double x, int limit) {
    return static_cast<int>(std::clamp(std::ceil(x), 0.0, static_cast<double>(limit)));
  };
  return {lo(x_ul, width), lo(y_ul, height), lo(x_lr, width), lo(y_lr, height)};
}

}  // namespace dbslam
