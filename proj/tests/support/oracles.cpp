#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <unistd.h>

namespace dbslam::oracle {

namespace {

bool inside(int u, int v, const Detection& d) {
  const double x = u;
  const double y = v;
  return x >= d.x_ul && x < d.x_lr && y >= d.y_ul && y < d.y_lr;
}

bool in_band(double d, double lo, double hi, double margin) {
  return lo - margin < d && d < hi + margin;
}

}  // namespace

std::pair<double, double> histogram_interval(const std::vector<float>& values, double bin_width) {
  std::map<long long, long long> bins;
  for (const float d : values) {
    if (d != 0.0f) ++bins[static_cast<long long>(std::floor(static_cast<double>(d) / bin_width))];
  }
  long long mode_bin = 0;
  long long mode_count = -1;
  for (const auto& [bin, count] : bins) {
    if (count > mode_count) {
      mode_bin = bin;
      mode_count = count;
    }
  }
  auto count_of = [&](long long b) {
    const auto it = bins.find(b);
    return it == bins.end() ? 0LL : it->second;
  };
  long long first = mode_bin;
  while (2 * count_of(first - 1) >= mode_count && first - 1 >= 0) --first;
  long long last = mode_bin;
  while (2 * count_of(last + 1) >= mode_count) ++last;
  return {static_cast<double>(first) * bin_width, static_cast<double>(last + 1) * bin_width};
}

FilterOutput filter_frame(const DepthImage& depth, const std::vector<Detection>& raw,
                          const FilterConfig& cfg) {
  const int w = depth.width();
  const int h = depth.height();
  FilterOutput out;
  out.width = w;
  out.height = h;

  // Keep confident detections, clipped to the image.
  for (const Detection& d : raw) {
    if (!(d.confidence > cfg.confidence_threshold)) continue;
    Detection c = d;
    c.x_ul = std::min(std::max(c.x_ul, 0.0), static_cast<double>(w));
    c.x_lr = std::min(std::max(c.x_lr, 0.0), static_cast<double>(w));
    c.y_ul = std::min(std::max(c.y_ul, 0.0), static_cast<double>(h));
    c.y_lr = std::min(std::max(c.y_lr, 0.0), static_cast<double>(h));
    if (c.x_ul < c.x_lr && c.y_ul < c.y_lr) out.kept.push_back(c);
  }
  const std::size_t n = out.kept.size();

  // Scene separation: each pixel goes to the most confident box containing it.
  out.background.assign(static_cast<std::size_t>(w) * h, 0.0f);
  out.parts.assign(n, std::vector<float>(static_cast<std::size_t>(w) * h, 0.0f));
  std::vector<float> all_values;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const float d = depth(u, v);
      const std::size_t idx = static_cast<std::size_t>(v) * w + u;
      if (d != 0.0f) all_values.push_back(d);
      int owner = -1;
      for (std::size_t t = 0; t < n; ++t) {
        if (!inside(u, v, out.kept[t])) continue;
        if (owner < 0 || out.kept[t].confidence > out.kept[static_cast<std::size_t>(owner)].confidence) {
          owner = static_cast<int>(t);
        }
      }
      if (owner >= 0) {
        out.parts[static_cast<std::size_t>(owner)][idx] = d;
      } else {
        out.background[idx] = d;
      }
    }
  }

  // Histograms of every part, then of the whole input frame.
  out.part_has_interval.assign(n, false);
  out.h_min.assign(n, 0.0);
  out.h_max.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<float> values;
    for (const float d : out.parts[t]) {
      if (d != 0.0f) values.push_back(d);
    }
    if (values.empty()) continue;
    out.part_has_interval[t] = true;
    std::tie(out.h_min[t], out.h_max[t]) = histogram_interval(values, cfg.bin_width);
  }
  if (all_values.empty()) return out;
  std::tie(out.b_min, out.b_max) = histogram_interval(all_values, cfg.bin_width);

  // Filtering loop over each magnified box.
  for (std::size_t t = 0; t < n; ++t) {
    const Detection& box = out.kept[t];
    const double cu = (box.x_ul + box.x_lr) / 2.0;
    const double cv = (box.y_ul + box.y_lr) / 2.0;
    const double hw = (box.x_lr - box.x_ul) * cfg.lambda / 2.0;
    const double hh = (box.y_lr - box.y_ul) * cfg.lambda / 2.0;
    Detection wide = box;
    wide.x_ul = std::max(cu - hw, 0.0);
    wide.x_lr = std::min(cu + hw, static_cast<double>(w));
    wide.y_ul = std::max(cv - hh, 0.0);
    wide.y_lr = std::min(cv + hh, static_cast<double>(h));
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (!inside(u, v, wide)) continue;
        const std::size_t idx = static_cast<std::size_t>(v) * w + u;
        float& bg = out.background[idx];
        if (!in_band(bg, out.b_min, out.b_max, cfg.bg_margin)) bg = 0.0f;
        float& hp = out.parts[t][idx];
        if (!out.part_has_interval[t] || hp == 0.0f) continue;
        if (!in_band(hp, out.h_min[t], out.h_max[t], cfg.human_margin)) {
          bg = in_band(hp, out.b_min, out.b_max, cfg.bg_margin) ? hp : 0.0f;
          hp = 0.0f;
        }
      }
    }
  }
  return out;
}

std::vector<float> part_image(const HumanPart& part, int width, int height) {
  std::vector<float> img(static_cast<std::size_t>(width) * height, 0.0f);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) img[static_cast<std::size_t>(v) * width + u] = part.at(u, v);
  }
  return img;
}

RandomFrame random_frame(std::mt19937_64& rng, int max_size) {
  std::uniform_int_distribution<int> size(4, max_size);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int w = size(rng);
  const int h = size(rng);

  // Sloped background between 2.5 and 5 m with a few holes.
  const double base = 2.5 + 1.5 * unit(rng);
  const double gu = unit(rng) * 0.04;
  const double gv = unit(rng) * 0.04;
  DepthImage depth(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (unit(rng) < 0.05) continue;
      depth(u, v) = static_cast<float>(base + gu * u + gv * v + 0.01 * unit(rng));
    }
  }

  RandomFrame frame;
  std::uniform_int_distribution<int> count(0, 3);
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    // Half-pixel corners, sometimes past the image edge.
    auto coord = [&](int limit) { return std::round((unit(rng) * (limit + 4) - 2.0) * 2.0) / 2.0; };
    Detection d;
    d.x_ul = coord(w);
    d.x_lr = coord(w);
    d.y_ul = coord(h);
    d.y_lr = coord(h);
    if (d.x_ul > d.x_lr) std::swap(d.x_ul, d.x_lr);
    if (d.y_ul > d.y_lr) std::swap(d.y_ul, d.y_lr);
    if (d.x_lr - d.x_ul < 1.0) d.x_lr = d.x_ul + 1.5;
    if (d.y_lr - d.y_ul < 1.0) d.y_lr = d.y_ul + 1.5;
    const double c = unit(rng);
    d.confidence = c < 0.2 ? 1.0 : 0.3 + 0.7 * c;  // ties at 1.0 happen often
    frame.detections.push_back(d);

    // Person inside the box, with planted outliers inside and around it.
    const double person = 1.0 + unit(rng);
    const int u0 = static_cast<int>(std::floor(d.x_ul)) - 2;
    const int u1 = static_cast<int>(std::ceil(d.x_lr)) + 2;
    const int v0 = static_cast<int>(std::floor(d.y_ul)) - 2;
    const int v1 = static_cast<int>(std::ceil(d.y_lr)) + 2;
    for (int v = std::max(v0, 0); v < std::min(v1, h); ++v) {
      for (int u = std::max(u0, 0); u < std::min(u1, w); ++u) {
        const bool in_box = u >= d.x_ul && u < d.x_lr && v >= d.y_ul && v < d.y_lr;
        const double r = unit(rng);
        if (in_box) {
          if (r < 0.75) {
            depth(u, v) = static_cast<float>(person + 0.1 * unit(rng));
          } else if (r < 0.9) {
            // leave the background visible through the box
          } else {
            depth(u, v) = static_cast<float>(0.3 + 8.0 * unit(rng));
          }
        } else if (r < 0.3) {
          depth(u, v) = static_cast<float>(person + 0.3 * (unit(rng) - 0.5));
        } else if (r < 0.4) {
          depth(u, v) = static_cast<float>(0.3 + 8.0 * unit(rng));
        }
      }
    }
  }
  frame.depth = std::move(depth);
  return frame;
}

SyntheticScene room_scene(int width, int height, double noise_sigma) {
  SyntheticScene s;
  s.intrinsics.width = width;
  s.intrinsics.height = height;
  s.intrinsics.fx = s.intrinsics.fy = 0.82 * width;
  s.intrinsics.cx = (width - 1) / 2.0;
  s.intrinsics.cy = (height - 1) / 2.0;
  s.noise_sigma = noise_sigma;
  s.planes = {{{0, 0, 4.5}, {0, 0, -1}},  {{0, 1.3, 0}, {0, -1, 0}}, {{0, -1.4, 0}, {0, 1, 0}},
              {{-2.2, 0, 0}, {1, 0, 0}}, {{2.2, 0, 0}, {-1, 0, 0}}};
  s.boxes = {{{-2.2, 0.0, 2.8}, {-1.5, 1.3, 3.6}}, {{1.4, -0.8, 3.0}, {2.2, 1.3, 3.6}},
             {{-0.5, 0.6, 3.6}, {0.7, 1.3, 4.2}},  {{0.9, -1.4, 4.0}, {1.2, 1.3, 4.3}},
             {{-1.3, -1.4, 4.1}, {-1.0, 1.3, 4.5}}, {{-1.0, 0.9, 2.6}, {-0.6, 1.3, 3.0}}};
  s.camera_path = {{0.0, Pose::identity()}};
  s.duration = 10.0;
  s.rate = 30.0;
  s.seed = 11;
  return s;
}

Actor walking_actor(const Vec3& from, const Vec3& to, double t0, double t1) {
  Actor a;
  a.shape = {{-0.22, -0.85, -0.08}, {0.22, 0.85, 0.08}};
  a.path = {{t0, from}, {t1, to}};
  return a;
}

SyntheticScene bundled_scene() {
  return load_scene(std::filesystem::path(DBSLAM_SOURCE_DIR) / "data" / "scenes" / "walkthrough.json");
}

std::filesystem::path scratch_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("dbslam_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dbslam::oracle
