#include <doctest.h>

#include <fstream>

#include "dbslam/error.hpp"
#include "dbslam/pipeline.hpp"
#include "dbslam/synthetic.hpp"
#include "oracles.hpp"

using namespace dbslam;

TEST_SUITE("pipeline") {

TEST_CASE("configuration keys") {
  PipelineConfig cfg;
  cfg.set("lambda", "1.5");
  cfg.set("max_misses", "3");
  cfg.set("fuse", "false");
  CHECK(cfg.filter.lambda == 1.5);
  CHECK(cfg.association.max_misses == 3);
  CHECK_FALSE(cfg.fuse);
  CHECK(cfg.was_set("lambda"));
  CHECK_FALSE(cfg.was_set("gate"));
  CHECK_THROWS_AS(cfg.set("lamda", "1.2"), InvalidInput);
  CHECK_THROWS_AS(cfg.set("gate", "0.8m"), InvalidInput);
  CHECK_THROWS_AS(cfg.set("max_misses", "1.5"), InvalidInput);
  CHECK_NOTHROW(cfg.validate());
  cfg.set("confidence_threshold", "1.0");
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("bundled configuration file parses") {
  PipelineConfig cfg;
  cfg.apply(read_key_values(std::filesystem::path(DBSLAM_SOURCE_DIR) / "data" / "config" / "default.cfg"));
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.filter.lambda == 1.2);
  CHECK(cfg.filter.confidence_threshold == 0.5);
  CHECK(cfg.filter.bg_margin == 0.1);
  CHECK(cfg.filter.human_margin == 0.2);
}

TEST_CASE("dataset metadata fills keys not set explicitly") {
  const auto dir = oracle::scratch_dir("meta");
  write_text_file(dir / SequenceLayout::kMetadata,
                  R"({"depth_scale": 1000, "intrinsics": {"fx": 100, "fy": 101, "cx": 40, "cy": 30, "width": 80, "height": 60}})");
  PipelineConfig cfg;
  cfg.set("fx", "120");
  apply_dataset_metadata(cfg, dir);
  CHECK(cfg.depth_scale == 1000.0);
  CHECK(cfg.intrinsics.fx == 120.0);
  CHECK(cfg.intrinsics.fy == 101.0);
  CHECK(cfg.intrinsics.width == 80);
  write_text_file(dir / SequenceLayout::kMetadata, "{ nope");
  CHECK_THROWS_AS(apply_dataset_metadata(cfg, dir), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("detections attach to the nearest frame within the tolerance") {
  std::vector<FrameBundle> frames(3);
  frames[0].timestamp = 1.0;
  frames[1].timestamp = 2.0;
  frames[2].timestamp = 3.0;
  const std::vector<DetectionFrame> dets{{2.00005, {{1, 1, 5, 5, 0.9}}}, {3.5, {{1, 1, 5, 5, 0.9}}}};
  attach_detections(frames, dets, 1e-4);
  CHECK(frames[0].detections.empty());
  CHECK(frames[1].detections.size() == 1);
  CHECK(frames[2].detections.empty());
}

TEST_CASE("end to end on a small synthetic sequence") {
  SyntheticScene scene = oracle::room_scene(160, 120, 0.003);
  scene.duration = 2.0;
  scene.camera_path = {{0.0, Pose::identity()}, {2.0, Pose(rot_x(-2.0), Vec3(0.05, 0.0, 0.1))}};
  scene.actors = {oracle::walking_actor({-0.8, 0.2, 2.4}, {-0.2, 0.2, 2.4}, 0.0, 2.0)};
  const auto dir = oracle::scratch_dir("pipeline");
  const GeneratedSequence seq = generate_sequence(scene, dir / "data");

  PipelineConfig cfg;
  cfg.set("min_valid_pixels", "500");
  const PipelineResult result = run_pipeline(dir / "data", dir / "data" / SequenceLayout::kDetections, cfg);
  REQUIRE(result.camera.size() == seq.frames);
  CHECK(result.camera.front().pose.matrix() == Pose::identity().matrix());
  CHECK(result.odometry_failures == 0);
  const auto pairs = associate_by_time(result.camera, seq.camera);
  CHECK(ate_rmse(pairs, align_rigid(pairs)) < 0.01);

  REQUIRE(result.tracks.size() == 1);
  CHECK(result.tracks[0].points.size() == seq.frames);
  CHECK(result.timings.size() == seq.frames);
  CHECK(result.map.size() > 0);

  write_pipeline_outputs(result, dir / "out");
  for (const char* name : {"camera_trajectory.txt", "track_0.txt", "map.ply", "timing.csv"}) {
    CHECK(std::filesystem::exists(dir / "out" / name));
  }
  std::ifstream timing(dir / "out" / "timing.csv");
  std::string header;
  std::getline(timing, header);
  CHECK(header == "timestamp,filter_ms,odometry_ms,tracking_ms,fusion_ms");
  CHECK(read_trajectory(dir / "out" / "camera_trajectory.txt").size() == seq.frames);
  std::filesystem::remove_all(dir);
}

TEST_CASE("frames must arrive in time order and match the intrinsics") {
  PipelineConfig cfg;
  Pipeline p(cfg);
  FrameBundle wrong;
  wrong.timestamp = 0.0;
  wrong.depth = DepthImage(10, 10, 1.0f);
  CHECK_THROWS_AS(p.process(wrong), DataError);
}

}  // TEST_SUITE
