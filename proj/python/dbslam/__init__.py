"""Dynamic-scene RGB-D odometry with dual bounding-box filtering."""

from ._core import (
    DataError,
    Error,
    Intrinsics,
    InvalidInput,
    IoError,
    NumericalError,
    ate,
    backproject,
    compute_histogram,
    dual_bbox_filter,
    estimate_pose,
    human_to_world,
    project,
    read_trajectory,
    render_depth,
    run_pipeline,
    write_trajectory,
)

__all__ = [
    "DataError",
    "Error",
    "Intrinsics",
    "InvalidInput",
    "IoError",
    "NumericalError",
    "ate",
    "backproject",
    "compute_histogram",
    "dual_bbox_filter",
    "estimate_pose",
    "human_to_world",
    "project",
    "read_trajectory",
    "render_depth",
    "run_pipeline",
    "write_trajectory",
]
