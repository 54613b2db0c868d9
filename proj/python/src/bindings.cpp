#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "dbslam/error.hpp"
#include "dbslam/evaluation.hpp"
#include "dbslam/io.hpp"
#include "dbslam/odometry.hpp"
#include "dbslam/pipeline.hpp"
#include "dbslam/placement.hpp"
#include "dbslam/separation.hpp"
#include "dbslam/synthetic.hpp"

namespace py = pybind11;
using namespace dbslam;

namespace {

using DepthArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

DepthImage to_depth(const DepthArray& a) {
  if (a.ndim() != 2) throw InvalidInput("depth array must be two-dimensional (rows, columns)");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  return {w, h, std::vector<float>(a.data(), a.data() + a.size())};
}

DepthArray from_depth(const DepthImage& d) {
  DepthArray out({d.height(), d.width()});
  std::memcpy(out.mutable_data(), d.data().data(), d.size() * sizeof(float));
  return out;
}

std::vector<Detection> to_detections(const DoubleArray& a) {
  if (a.size() == 0) return {};
  if (a.ndim() != 2 || (a.shape(1) != 4 && a.shape(1) != 5)) {
    throw InvalidInput("detections must be an (n, 4) or (n, 5) array of x_ul y_ul x_lr y_lr [confidence]");
  }
  std::vector<Detection> dets;
  const auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    dets.push_back({r(i, 0), r(i, 1), r(i, 2), r(i, 3), a.shape(1) == 5 ? r(i, 4) : 1.0});
  }
  return dets;
}

// Trajectories cross the boundary as (n, 8) arrays: timestamp tx ty tz qx qy qz qw.
Trajectory to_trajectory(const DoubleArray& a) {
  if (a.ndim() != 2 || a.shape(1) != 8) throw InvalidInput("trajectory must be an (n, 8) array");
  Trajectory out;
  const auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    const Eigen::Quaterniond q(r(i, 7), r(i, 4), r(i, 5), r(i, 6));
    out.push_back({r(i, 0), Pose::from_quaternion(q, Vec3(r(i, 1), r(i, 2), r(i, 3)))});
  }
  validate_trajectory(out);
  return out;
}

DoubleArray from_trajectory(const Trajectory& t) {
  DoubleArray out({static_cast<py::ssize_t>(t.size()), py::ssize_t{8}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto n = static_cast<py::ssize_t>(i);
    const Vec3& p = t[i].pose.translation();
    const Eigen::Quaterniond q = t[i].pose.quaternion();
    const double row[8] = {t[i].timestamp, p.x(), p.y(), p.z(), q.x(), q.y(), q.z(), q.w()};
    for (py::ssize_t c = 0; c < 8; ++c) w(n, c) = row[c];
  }
  return out;
}

DoubleArray from_track(const Track& track) {
  DoubleArray out({static_cast<py::ssize_t>(track.points.size()), py::ssize_t{4}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < track.points.size(); ++i) {
    const auto n = static_cast<py::ssize_t>(i);
    w(n, 0) = track.points[i].timestamp;
    for (int c = 0; c < 3; ++c) w(n, c + 1) = track.points[i].position(c);
  }
  return out;
}

DoubleArray from_points(const std::vector<Vec3>& pts) {
  DoubleArray out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int c = 0; c < 3; ++c) w(static_cast<py::ssize_t>(i), c) = pts[i](c);
  }
  return out;
}

PipelineConfig to_config(const std::map<std::string, std::string>& options) {
  PipelineConfig cfg;
  cfg.apply(options);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dynamic-scene RGB-D odometry with dual bounding-box filtering";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<Intrinsics>(m, "Intrinsics")
      .def(py::init([](double fx, double fy, double cx, double cy, int width, int height) {
             Intrinsics k{fx, fy, cx, cy, width, height};
             k.validate();
             return k;
           }),
           py::arg("fx") = 525.0, py::arg("fy") = 525.0, py::arg("cx") = 319.5,
           py::arg("cy") = 239.5, py::arg("width") = 640, py::arg("height") = 480)
      .def_readwrite("fx", &Intrinsics::fx)
      .def_readwrite("fy", &Intrinsics::fy)
      .def_readwrite("cx", &Intrinsics::cx)
      .def_readwrite("cy", &Intrinsics::cy)
      .def_readwrite("width", &Intrinsics::width)
      .def_readwrite("height", &Intrinsics::height)
      .def("__repr__", [](const Intrinsics& k) {
        return "Intrinsics(fx=" + format_double(k.fx) + ", fy=" + format_double(k.fy) +
               ", cx=" + format_double(k.cx) + ", cy=" + format_double(k.cy) +
               ", width=" + std::to_string(k.width) + ", height=" + std::to_string(k.height) + ")";
      });

  m.def("backproject",
        [](double u, double v, double depth, const Intrinsics& k) { return backproject(u, v, depth, k).vector(); },
        py::arg("u"), py::arg("v"), py::arg("depth"), py::arg("intrinsics"),
        "Homogeneous camera-frame point (x, y, z, 1) of pixel (u, v) at metric depth.");
  m.def("project",
        [](const Vec4& p, const Intrinsics& k) {
          const PixelDepth px = project({p(0), p(1), p(2), p(3)}, k);
          return py::make_tuple(px.u, px.v, px.depth);
        },
        py::arg("point"), py::arg("intrinsics"), "Pixel (u, v) and depth of a homogeneous camera-frame point.");

  m.def("compute_histogram",
        [](const DepthArray& region, double bin_width) {
          const DepthInterval i = compute_histogram({region.data(), static_cast<std::size_t>(region.size())}, bin_width);
          return py::make_tuple(i.lo, i.hi);
        },
        py::arg("region"), py::arg("bin_width") = 0.2, "Principal depth interval (lo, hi) of the nonzero values.");

  m.def("dual_bbox_filter",
        [](const DepthArray& depth, const DoubleArray& detections, double lambda, double bin_width,
           double bg_margin, double human_margin, double confidence_threshold) {
          FilterConfig cfg{lambda, bin_width, bg_margin, human_margin, confidence_threshold};
          const DepthImage img = to_depth(depth);
          const std::vector<Detection> dets = to_detections(detections);
          const SeparationResult sep = dual_bbox_filter(img, dets, cfg);
          py::list parts;
          for (const HumanPart& part : sep.parts) {
            DepthArray full({img.height(), img.width()});
            std::fill_n(full.mutable_data(), full.size(), 0.0f);
            auto w = full.mutable_unchecked<2>();
            for (int v = part.rect.v0; v < part.rect.v1; ++v) {
              for (int u = part.rect.u0; u < part.rect.u1; ++u) w(v, u) = part.at(u, v);
            }
            py::dict d;
            d["box"] = py::make_tuple(part.detection.x_ul, part.detection.y_ul, part.detection.x_lr,
                                      part.detection.y_lr, part.detection.confidence);
            d["depth"] = full;
            d["interval"] = part.interval ? py::object(py::make_tuple(part.interval->lo, part.interval->hi))
                                          : py::object(py::none());
            parts.append(d);
          }
          return py::make_tuple(from_depth(sep.background), parts);
        },
        py::arg("depth"), py::arg("detections"), py::arg("lambda_") = 1.2, py::arg("bin_width") = 0.2,
        py::arg("bg_margin") = 0.1, py::arg("human_margin") = 0.2, py::arg("confidence_threshold") = 0.5,
        "Splits a depth map into (background, parts); each part is a dict with box, full-size depth and interval.");

  m.def("estimate_pose",
        [](const DepthArray& prev, const DepthArray& curr, const Intrinsics& k, const Mat4& init,
           std::size_t min_valid_pixels) {
          OdometryConfig cfg;
          cfg.min_valid_pixels = min_valid_pixels;
          OdometryReport r;
          {
            const DepthImage a = to_depth(prev);
            const DepthImage b = to_depth(curr);
            const Pose p0 = Pose::from_matrix(init);
            py::gil_scoped_release release;
            r = estimate_pose(a, b, k, p0, cfg);
          }
          py::dict d;
          d["pose"] = r.pose.matrix();
          d["iterations"] = r.iterations;
          d["residual_rms"] = r.residual_rms;
          d["inliers"] = r.inliers;
          d["diverged"] = r.diverged;
          return d;
        },
        py::arg("prev"), py::arg("curr"), py::arg("intrinsics"), py::arg("init") = Mat4::Identity().eval(),
        py::arg("min_valid_pixels") = 1000,
        "4x4 pose mapping current-frame points into the previous camera frame, with solver diagnostics.");

  m.def("ate",
        [](const DoubleArray& est, const DoubleArray& gt, bool align, double max_dt) {
          const auto pairs = associate_by_time(to_trajectory(est), to_trajectory(gt), max_dt);
          return ate_rmse(pairs, align ? align_rigid(pairs) : Pose::identity());
        },
        py::arg("estimate"), py::arg("ground_truth"), py::arg("align") = true, py::arg("max_dt") = 0.02,
        "Absolute trajectory error (RMSE, meters) of (n, 8) trajectories.");

  m.def("human_to_world",
        [](const Mat3& rotation, const Vec3& p_w) { return human_to_world(rotation, p_w).matrix(); },
        py::arg("camera_rotation"), py::arg("position"), "4x4 human-to-world transform.");

  m.def("render_depth",
        [](const std::string& scene_json, double t, std::uint64_t stream) {
          const SyntheticScene scene = scene_from_json(scene_json);
          return from_depth(render_depth(scene, t, stream));
        },
        py::arg("scene_json"), py::arg("t"), py::arg("stream") = 0,
        "Noisy metric depth of a JSON scene at time t.");

  m.def("read_trajectory", [](const std::filesystem::path& p) { return from_trajectory(read_trajectory(p)); },
        py::arg("path"));
  m.def("write_trajectory",
        [](const std::filesystem::path& p, const DoubleArray& t) { write_trajectory(p, to_trajectory(t)); },
        py::arg("path"), py::arg("trajectory"));

  m.def("run_pipeline",
        [](const std::filesystem::path& dataset, const std::filesystem::path& detections,
           const std::map<std::string, std::string>& options) {
          PipelineResult r;
          {
            PipelineConfig cfg = to_config(options);
            py::gil_scoped_release release;
            r = run_pipeline(dataset, detections, std::move(cfg));
          }
          py::dict tracks;
          for (const Track& t : r.tracks) tracks[py::int_(t.id)] = from_track(t);
          py::dict d;
          d["camera"] = from_trajectory(r.camera);
          d["tracks"] = tracks;
          d["map"] = from_points(r.map.points);
          d["odometry_failures"] = r.odometry_failures;
          return d;
        },
        py::arg("dataset_dir"), py::arg("detections_file"), py::arg("options") = std::map<std::string, std::string>{},
        "Runs the full pipeline; options use the configuration file keys.");
}
