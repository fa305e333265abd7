"""Vision pipeline for automated experiment verification."""

from .metrics import SSIM_C1, SSIM_C2, ssim
from .ops import (
    Box,
    find_bounding_boxes,
    median_filter,
    morph_close,
    subtract_background,
    threshold,
)
from .pipeline import PipelineParams, detect_moved_boxes, measure_fiducial_mm_per_px
from .tracking import BoxMatch, MotionVerdict, TrackResult, track_displacement, verify_motion

__all__ = [
    "Box",
    "BoxMatch",
    "MotionVerdict",
    "PipelineParams",
    "SSIM_C1",
    "SSIM_C2",
    "TrackResult",
    "detect_moved_boxes",
    "find_bounding_boxes",
    "measure_fiducial_mm_per_px",
    "median_filter",
    "morph_close",
    "ssim",
    "subtract_background",
    "threshold",
    "track_displacement",
    "verify_motion",
]
