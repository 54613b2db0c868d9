import json
import os
import pathlib
import subprocess

import numpy as np
import pytest

import dbslam

SOURCE_DIR = pathlib.Path(os.environ.get("DBSLAM_SOURCE_DIR", pathlib.Path(__file__).parents[2]))
SMALL_SCENE = SOURCE_DIR / "tests" / "cli" / "small_scene.json"


def small_intrinsics():
    return dbslam.Intrinsics(fx=70.0, fy=70.0, cx=39.5, cy=29.5, width=80, height=60)


def wall_scene(z=2.0):
    k = small_intrinsics()
    return json.dumps(
        {
            "intrinsics": {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy, "width": k.width, "height": k.height},
            "planes": [{"point": [0, 0, z], "normal": [0, 0, -1]}],
            "camera_path": [{"t": 0.0, "position": [0, 0, 0], "euler_deg": [0, 0, 0]}],
            "noise_sigma": 0.0,
            "duration": 1.0,
        }
    )


def test_backproject_project_round_trip():
    k = small_intrinsics()
    p = dbslam.backproject(12.0, 7.5, 1.7, k)
    assert p.shape == (4,)
    assert p[3] == 1.0
    u, v, d = dbslam.project(p, k)
    assert u == pytest.approx(12.0, abs=1e-12)
    assert v == pytest.approx(7.5, abs=1e-12)
    assert d == pytest.approx(1.7, abs=1e-12)
    with pytest.raises(ValueError):
        dbslam.backproject(1.0, 1.0, 0.0, k)


def test_compute_histogram_principal_interval():
    # Bin [1.2, 1.4) holds 2 of the modal 3 and joins; bin [1.4, 1.6) holds 1 and does not.
    values = np.array([0.0, 1.05, 1.1, 1.15, 1.25, 1.3, 1.5, 3.9], dtype=np.float32)
    lo, hi = dbslam.compute_histogram(values, 0.2)
    assert lo == pytest.approx(1.0, abs=1e-9)
    assert hi == pytest.approx(1.4, abs=1e-9)
    with pytest.raises(dbslam.InvalidInput):
        dbslam.compute_histogram(np.zeros(4, dtype=np.float32), 0.2)


def test_dual_bbox_filter_separates_a_box():
    depth = np.full((60, 80), 3.0, dtype=np.float32)
    depth[20:40, 30:50] = 1.5
    background, parts = dbslam.dual_bbox_filter(depth, np.array([[30, 20, 50, 40, 0.9]]))
    assert background.shape == depth.shape
    assert len(parts) == 1
    human = parts[0]["depth"]
    assert np.all(human[20:40, 30:50] == 1.5)
    assert np.all(background[20:40, 30:50] == 0.0)
    # Pixels are partitioned: nothing is duplicated and background outside the box is intact.
    assert not np.any((background != 0) & (human != 0))
    assert np.all(background[:, :25] == 3.0)
    low, _ = dbslam.dual_bbox_filter(depth, np.array([[30, 20, 50, 40, 0.3]]))
    assert np.array_equal(low, depth)


def test_render_and_estimate_pose_identity():
    scene = wall_scene()
    depth = dbslam.render_depth(scene, 0.0)
    assert depth.shape == (60, 80)
    assert np.allclose(depth, 2.0, atol=1e-6)
    report = dbslam.estimate_pose(depth, depth, small_intrinsics(), min_valid_pixels=100)
    assert report["pose"].shape == (4, 4)
    assert np.allclose(report["pose"], np.eye(4), atol=1e-9)
    assert not report["diverged"]


def test_human_to_world_flip():
    t = dbslam.human_to_world(np.eye(3), np.array([1.0, 2.0, 3.0]))
    assert np.allclose(t[:3, :3], np.diag([1.0, -1.0, -1.0]), atol=1e-12)
    assert np.allclose(t[:3, 3], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        dbslam.human_to_world(2.0 * np.eye(3), np.zeros(3))


def test_trajectory_io_and_ate(tmp_path):
    t = np.arange(5, dtype=float)
    traj = np.zeros((5, 8))
    traj[:, 0] = t
    traj[:, 1] = np.cos(t)
    traj[:, 2] = np.sin(t)
    traj[:, 3] = 0.1 * t
    traj[:, 7] = 1.0
    path = tmp_path / "traj.txt"
    dbslam.write_trajectory(path, traj)
    back = dbslam.read_trajectory(path)
    assert np.allclose(back, traj, atol=1e-12)
    assert dbslam.ate(traj, traj) == pytest.approx(0.0, abs=1e-12)
    shifted = traj.copy()
    shifted[:, 1:4] += [0.5, -0.2, 0.3]
    assert dbslam.ate(shifted, traj, align=False) == pytest.approx(np.sqrt(0.25 + 0.04 + 0.09), rel=1e-12)
    assert dbslam.ate(shifted, traj) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.skipif(not SMALL_SCENE.exists(), reason="bundled scene missing")
def test_run_pipeline_on_simulated_sequence(tmp_path):
    cli = pathlib.Path(os.environ.get("DBSLAM_CLI", ""))
    if not cli.is_file():
        pytest.skip("command-line tool not built")
    data = tmp_path / "data"
    subprocess.run([str(cli), "simulate", str(SMALL_SCENE), str(data)], check=True, capture_output=True)
    result = dbslam.run_pipeline(data, data / "detections.txt", {"min_valid_pixels": "500", "fuse": "false"})
    gt = dbslam.read_trajectory(data / "groundtruth.txt")
    assert result["camera"].shape == (30, 8)
    assert result["odometry_failures"] == 0
    assert dbslam.ate(result["camera"], gt) < 0.01
    assert len(result["tracks"]) >= 1
