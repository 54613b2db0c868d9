#include "dbslam/io.hpp"

#include <png.h>

#include <csetjmp>
#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <unordered_map>

#include "dbslam/error.hpp"

namespace dbslam {

namespace {

constexpr double kQuaternionTolerance = 1e-3;
constexpr double kColorMaxDt = 0.02;

std::string located(const fs::path& path, std::size_t line, const std::string& msg) {
  return path.string() + ":" + std::to_string(line) + ": " + msg;
}

// Splits on whitespace.
std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_number(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, long long& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool skippable(std::string_view line) {
  const auto t = tokens(line);
  return t.empty() || t.front().front() == '#';
}

// Reads a text file line by line, handing non-comment lines and their 1-based number to fn.
template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (!skippable(line)) fn(line, line_no);
    if (end == text.size()) break;
    pos = end + 1;
  }
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
  return f;
}


}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw InvalidInput("format_double: conversion failed");
  return {buf.data(), ptr};
}

namespace {

// libpng messages go into the caller's error string instead of stderr.
[[noreturn]] void png_error_to_string(png_structp png, png_const_charp msg) {
  *static_cast<std::string*>(png_get_error_ptr(png)) = msg;
  png_longjmp(png, 1);
}

void png_ignore_warning(png_structp, png_const_charp) {}

// libpng reports errors by longjmp; the vectors live in the caller's frame so nothing with a
// destructor is skipped by the jump.
bool read_png16_impl(std::FILE* file, std::vector<std::uint16_t>* data, std::vector<png_bytep>* rows,
                     int* width, int* height, std::string* err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, err, png_error_to_string,
                                           png_ignore_warning);
  if (png == nullptr) return *err = "cannot allocate reader", false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return *err = "cannot allocate info", false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    *err = "corrupt or truncated png (" + *err + ")";
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    return *err = "expected a 16-bit grayscale png", false;
  }
  png_set_swap(png);  // PNG words are big-endian
  png_read_update_info(png, info);
  data->resize(static_cast<std::size_t>(w) * h);
  rows->resize(h);
  for (png_uint_32 v = 0; v < h; ++v) {
    (*rows)[v] = reinterpret_cast<png_bytep>(data->data() + static_cast<std::size_t>(v) * w);
  }
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  *width = static_cast<int>(w);
  *height = static_cast<int>(h);
  return true;
}

bool write_png16_impl(std::FILE* file, int width, int height, const std::uint16_t* data, std::string* err) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err, png_error_to_string,
                                            png_ignore_warning);
  if (png == nullptr) return *err = "cannot allocate writer", false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return *err = "cannot allocate info", false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return *err = "png encoding failed", false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 1);
  png_write_info(png, info);
  png_set_swap(png);
  for (int v = 0; v < height; ++v) {
    png_write_row(png, reinterpret_cast<png_const_bytep>(data + static_cast<std::size_t>(v) * width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

std::vector<std::uint16_t> read_png16(const fs::path& path, int& width, int& height) {
  FilePtr file = open_file(path, "rb");
  std::vector<std::uint16_t> data;
  std::vector<png_bytep> rows;
  std::string err;
  if (!read_png16_impl(file.get(), &data, &rows, &width, &height, &err)) {
    throw DataError(path.string() + ": " + err);
  }
  return data;
}

void write_png16(const fs::path& path, int width, int height, const std::vector<std::uint16_t>& data) {
  if (data.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidInput("write_png16: data size mismatch");
  }
  FilePtr file = open_file(path, "wb");
  std::string err;
  if (!write_png16_impl(file.get(), width, height, data.data(), &err)) {
    throw IoError(path.string() + ": " + err);
  }
  if (std::fflush(file.get()) != 0) throw IoError("cannot write " + path.string());
}

ColorImage read_png_rgb(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    throw DataError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  ColorImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.data.resize(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr) == 0) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError(path.string() + ": " + msg);
  }
  return out;
}

DepthImage depth_from_raw(int width, int height, const std::vector<std::uint16_t>& raw,
                          double depth_scale) {
  if (!(depth_scale > 0.0)) throw InvalidInput("depth_scale must be positive");
  std::vector<float> data(raw.size());
  std::transform(raw.begin(), raw.end(), data.begin(), [&](std::uint16_t r) {
    return static_cast<float>(static_cast<double>(r) / depth_scale);
  });
  return {width, height, std::move(data)};
}

std::vector<std::uint16_t> depth_to_raw(const DepthImage& depth, double depth_scale) {
  if (!(depth_scale > 0.0)) throw InvalidInput("depth_scale must be positive");
  std::vector<std::uint16_t> raw(depth.size());
  std::transform(depth.data().begin(), depth.data().end(), raw.begin(), [&](float d) {
    const double r = std::round(static_cast<double>(d) * depth_scale);
    return (r >= 1.0 && r <= 65535.0) ? static_cast<std::uint16_t>(r) : std::uint16_t{0};
  });
  return raw;
}

DepthImage quantize_depth(const DepthImage& depth, double depth_scale) {
  return depth_from_raw(depth.width(), depth.height(), depth_to_raw(depth, depth_scale), depth_scale);
}

DepthImage read_depth_png(const fs::path& path, double depth_scale) {
  int w = 0;
  int h = 0;
  const auto raw = read_png16(path, w, h);
  return depth_from_raw(w, h, raw, depth_scale);
}

void write_depth_png(const fs::path& path, const DepthImage& depth, double depth_scale) {
  write_png16(path, depth.width(), depth.height(), depth_to_raw(depth, depth_scale));
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<IndexEntry> read_index_file(const fs::path& path) {
  std::vector<IndexEntry> out;
  for_each_line(read_text_file(path), [&](std::string_view line, std::size_t n) {
    const auto t = tokens(line);
    IndexEntry e;
    if (t.size() != 2 || !parse_number(t[0], e.timestamp)) {
      throw DataError(located(path, n, "expected 'timestamp path'"));
    }
    if (!out.empty() && !(e.timestamp > out.back().timestamp)) {
      throw DataError(located(path, n, "timestamps must be strictly increasing"));
    }
    e.path = std::string(t[1]);
    out.push_back(std::move(e));
  });
  return out;
}

TumSequenceReader::TumSequenceReader(const fs::path& dir, double depth_scale)
    : dir_(dir), depth_scale_(depth_scale) {
  if (!(depth_scale > 0.0)) throw InvalidInput("depth_scale must be positive");
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  depth_ = read_index_file(dir / "depth.txt");
  if (fs::exists(dir / "rgb.txt")) rgb_ = read_index_file(dir / "rgb.txt");
}

std::optional<FrameBundle> TumSequenceReader::next() {
  if (cursor_ >= depth_.size()) return std::nullopt;
  const IndexEntry& e = depth_[cursor_++];
  FrameBundle frame;
  frame.timestamp = e.timestamp;
  frame.depth = read_depth_png(dir_ / e.path, depth_scale_);
  if (!rgb_.empty()) {
    auto it = std::lower_bound(rgb_.begin(), rgb_.end(), e.timestamp,
                               [](const IndexEntry& x, double t) { return x.timestamp < t; });
    const IndexEntry* best = nullptr;
    if (it != rgb_.end()) best = &*it;
    if (it != rgb_.begin() &&
        (best == nullptr || e.timestamp - (it - 1)->timestamp < best->timestamp - e.timestamp)) {
      best = &*(it - 1);
    }
    if (best != nullptr && std::abs(best->timestamp - e.timestamp) <= kColorMaxDt) {
      frame.color = read_png_rgb(dir_ / best->path);
    }
  }
  return frame;
}

std::vector<FrameBundle> read_tum_sequence(const fs::path& dir, double depth_scale) {
  TumSequenceReader reader(dir, depth_scale);
  std::vector<FrameBundle> out;
  out.reserve(reader.size());
  while (auto f = reader.next()) out.push_back(std::move(*f));
  return out;
}

std::vector<DetectionFrame> parse_detections(const std::string& text) {
  std::vector<DetectionFrame> out;
  std::unordered_map<double, std::size_t> by_time;
  const fs::path label("<detections>");
  for_each_line(text, [&](std::string_view line, std::size_t n) {
    const auto t = tokens(line);
    double v[6];
    bool ok = t.size() == 6;
    for (std::size_t i = 0; ok && i < 6; ++i) ok = parse_number(t[i], v[i]);
    if (!ok) throw DataError(located(label, n, "expected 'timestamp x_ul y_ul x_lr y_lr confidence'"));
    const Detection d{v[1], v[2], v[3], v[4], v[5]};
    if (!(d.x_ul < d.x_lr) || !(d.y_ul < d.y_lr)) {
      throw DataError(located(label, n, "box corners inverted (x_ul >= x_lr or y_ul >= y_lr)"));
    }
    if (d.confidence < 0.0 || d.confidence > 1.0) {
      throw DataError(located(label, n, "confidence outside [0, 1]"));
    }
    auto [it, inserted] = by_time.try_emplace(v[0], out.size());
    if (inserted) out.push_back({v[0], {}});
    out[it->second].detections.push_back(d);
  });
  return out;
}

std::vector<DetectionFrame> read_detections(const fs::path& path) {
  try {
    return parse_detections(read_text_file(path));
  } catch (const DataError& e) {
    std::string msg = e.what();
    const std::string tag = "<detections>";
    if (msg.rfind(tag, 0) == 0) msg = path.string() + msg.substr(tag.size());
    throw DataError(msg);
  }
}

void write_detections(const fs::path& path, const std::vector<DetectionFrame>& frames) {
  std::string text;
  for (const DetectionFrame& f : frames) {
    for (const Detection& d : f.detections) {
      text += format_double(f.timestamp) + " " + format_double(d.x_ul) + " " + format_double(d.y_ul) +
              " " + format_double(d.x_lr) + " " + format_double(d.y_lr) + " " +
              format_double(d.confidence) + "\n";
    }
  }
  write_text_file(path, text);
}

Trajectory parse_trajectory(const std::string& text) {
  Trajectory out;
  const fs::path label("<trajectory>");
  for_each_line(text, [&](std::string_view line, std::size_t n) {
    const auto t = tokens(line);
    double v[8];
    bool ok = t.size() == 8;
    for (std::size_t i = 0; ok && i < 8; ++i) ok = parse_number(t[i], v[i]);
    if (!ok) throw DataError(located(label, n, "expected 'timestamp tx ty tz qx qy qz qw'"));
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    const double norm = q.norm();
    if (std::abs(norm - 1.0) > kQuaternionTolerance) {
      throw DataError(located(label, n, "quaternion is not unit length"));
    }
    if (std::abs(norm - 1.0) > 1e-9) {
      std::clog << "warning: " << located(label, n, "renormalized quaternion (norm ") << norm << ")\n";
    }
    if (!out.empty() && !(v[0] > out.back().timestamp)) {
      throw DataError(located(label, n, "timestamps must be strictly increasing"));
    }
    out.push_back({v[0], Pose::from_quaternion(q, Vec3(v[1], v[2], v[3]))});
  });
  return out;
}

Trajectory read_trajectory(const fs::path& path) {
  try {
    return parse_trajectory(read_text_file(path));
  } catch (const DataError& e) {
    std::string msg = e.what();
    const std::string tag = "<trajectory>";
    if (msg.rfind(tag, 0) == 0) msg = path.string() + msg.substr(tag.size());
    throw DataError(msg);
  }
}

std::string format_trajectory(const Trajectory& trajectory) {
  std::string text;
  for (const StampedPose& p : trajectory) {
    const Vec3& t = p.pose.translation();
    const Eigen::Quaterniond q = p.pose.quaternion();
    text += format_double(p.timestamp);
    for (const double x : {t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()}) {
      text += ' ';
      text += format_double(x);
    }
    text += '\n';
  }
  return text;
}

void write_trajectory(const fs::path& path, const Trajectory& trajectory) {
  write_text_file(path, format_trajectory(trajectory));
}

void write_ply(const fs::path& path, const PointCloud& cloud) {
  const bool colored = cloud.colored();
  if (colored && cloud.colors.size() != cloud.points.size()) {
    throw InvalidInput("write_ply: colors and points differ in length");
  }
  std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex " +
                       std::to_string(cloud.size()) +
                       "\nproperty float x\nproperty float y\nproperty float z\n";
  if (colored) header += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  header += "end_header\n";

  std::string body;
  const std::size_t stride = 12 + (colored ? 3 : 0);
  body.resize(cloud.size() * stride);
  char* out = body.data();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const float xyz[3] = {static_cast<float>(cloud.points[i].x()), static_cast<float>(cloud.points[i].y()),
                          static_cast<float>(cloud.points[i].z())};
    std::memcpy(out, xyz, 12);  // host is little-endian
    if (colored) std::memcpy(out + 12, cloud.colors[i].data(), 3);
    out += stride;
  }
  write_text_file(path, header + body);
}

PointCloud read_ply(const fs::path& path) {
  const std::string data = read_text_file(path);
  const std::size_t end = data.find("end_header\n");
  if (data.rfind("ply\n", 0) != 0 || end == std::string::npos) {
    throw DataError(path.string() + ": not a PLY file");
  }
  std::size_t count = 0;
  std::vector<std::string> props;
  bool binary_le = false;
  std::istringstream header(data.substr(0, end));
  std::string line;
  while (std::getline(header, line)) {
    const auto t = tokens(line);
    if (t.empty()) continue;
    if (t[0] == "format") {
      binary_le = t.size() >= 2 && t[1] == "binary_little_endian";
    } else if (t[0] == "element") {
      long long n = 0;
      if (t.size() != 3 || t[1] != "vertex" || !parse_int(t[2], n) || n < 0) {
        throw DataError(path.string() + ": unsupported element '" + line + "'");
      }
      count = static_cast<std::size_t>(n);
    } else if (t[0] == "property") {
      if (t.size() != 3) throw DataError(path.string() + ": unsupported property '" + line + "'");
      props.emplace_back(std::string(t[1]) + " " + std::string(t[2]));
    }
  }
  const std::vector<std::string> plain = {"float x", "float y", "float z"};
  std::vector<std::string> with_color = plain;
  with_color.insert(with_color.end(), {"uchar red", "uchar green", "uchar blue"});
  if (!binary_le || (props != plain && props != with_color)) {
    throw DataError(path.string() + ": unsupported PLY layout");
  }
  const bool colored = props == with_color;
  const std::size_t stride = colored ? 15 : 12;
  const std::size_t offset = end + std::string("end_header\n").size();
  if (data.size() - offset != count * stride) {
    throw DataError(path.string() + ": PLY body length does not match vertex count");
  }
  PointCloud cloud;
  cloud.points.reserve(count);
  const char* in = data.data() + offset;
  for (std::size_t i = 0; i < count; ++i) {
    float xyz[3];
    std::memcpy(xyz, in, 12);
    cloud.points.emplace_back(xyz[0], xyz[1], xyz[2]);
    if (colored) {
      Rgb c;
      std::memcpy(c.data(), in + 12, 3);
      cloud.colors.push_back(c);
    }
    in += stride;
  }
  return cloud;
}

void write_obj(const fs::path& path, const Mesh& mesh) {
  mesh.validate();
  std::string text;
  for (const Vec3& v : mesh.vertices) {
    text += "v " + format_double(v.x()) + " " + format_double(v.y()) + " " + format_double(v.z()) + "\n";
  }
  for (const auto& f : mesh.faces) {
    text += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " +
            std::to_string(f[2] + 1) + "\n";
  }
  write_text_file(path, text);
}

Mesh read_obj(const fs::path& path) {
  Mesh mesh;
  for_each_line(read_text_file(path), [&](std::string_view line, std::size_t n) {
    const auto t = tokens(line);
    if (t[0] == "v") {
      double x, y, z;
      if (t.size() != 4 || !parse_number(t[1], x) || !parse_number(t[2], y) || !parse_number(t[3], z)) {
        throw DataError(located(path, n, "expected 'v x y z'"));
      }
      mesh.vertices.emplace_back(x, y, z);
    } else if (t[0] == "f") {
      if (t.size() != 4) throw DataError(located(path, n, "only triangular faces are supported"));
      std::array<int, 3> face{};
      for (std::size_t i = 0; i < 3; ++i) {
        const std::string_view idx = t[i + 1].substr(0, t[i + 1].find('/'));
        long long k = 0;
        if (!parse_int(idx, k) || k < 1 || k > static_cast<long long>(mesh.vertices.size())) {
          throw DataError(located(path, n, "bad face index"));
        }
        face[i] = static_cast<int>(k - 1);
      }
      mesh.faces.push_back(face);
    } else if (t[0] == "vn" || t[0] == "vt" || t[0] == "o" || t[0] == "g" || t[0] == "s" ||
               t[0] == "usemtl" || t[0] == "mtllib") {
      // Non-geometric records carry nothing this reader keeps.
    } else {
      throw DataError(located(path, n, "unsupported record '" + std::string(t[0]) + "'"));
    }
  });
  return mesh;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  for_each_line(text, [&](std::string_view line, std::size_t n) {
    const std::size_t eq = line.find('=');
    auto trim = [](std::string_view s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
      return s;
    };
    const std::string_view key = eq == std::string_view::npos ? std::string_view{} : trim(line.substr(0, eq));
    if (key.empty()) throw DataError("config line " + std::to_string(n) + ": expected 'key = value'");
    std::string_view value = trim(line.substr(eq + 1));
    const std::size_t hash = value.find('#');
    if (hash != std::string_view::npos) value = trim(value.substr(0, hash));
    out[std::string(key)] = std::string(value);
  });
  return out;
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  return parse_key_values(read_text_file(path));
}

}  // namespace dbslam
