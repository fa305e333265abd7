"""Composed detection pipeline: change masking plus per-frame segmentation.

The stage order for the change mask follows the checking flow: background
subtraction, closing, median filtering, thresholding. Object boxes come from
segmenting each frame with the same smoothing stages, then keeping only the
components that overlap the change mask, which discards static scenery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import Box, find_bounding_boxes, median_filter, morph_close, subtract_background, threshold
from .tracking import TrackResult, track_displacement


@dataclass(frozen=True)
class PipelineParams:
    close_kernel: int = 5
    median_kernel: int = 5
    diff_threshold: int = 30
    segment_threshold: int = 80
    invert_segment: bool = False  # set for scenes with dark objects on light ground
    min_area: int = 50
    mm_per_px: float = 0.125


def change_mask(baseline: np.ndarray, frame: np.ndarray, params: PipelineParams) -> np.ndarray:
    diff = subtract_background(frame, baseline)
    closed = morph_close(diff, params.close_kernel)
    filtered = median_filter(closed, params.median_kernel)
    return threshold(filtered, params.diff_threshold)


def segment(frame: np.ndarray, params: PipelineParams) -> list[Box]:
    src = (255 - np.asarray(frame, dtype=np.uint8)) if params.invert_segment else frame
    closed = morph_close(src, params.close_kernel)
    filtered = median_filter(closed, params.median_kernel)
    binary = threshold(filtered, params.segment_threshold)
    return find_bounding_boxes(binary, params.min_area)


def _touches(mask: np.ndarray, box: Box) -> bool:
    return bool(mask[box.y : box.y + box.h, box.x : box.x + box.w].any())


def detect_moved_boxes(
    baseline: np.ndarray, frame: np.ndarray, params: PipelineParams
) -> TrackResult:
    """Boxes of objects that moved between baseline and frame, matched up."""
    mask = change_mask(baseline, frame, params)
    before = [b for b in segment(baseline, params) if _touches(mask, b)]
    after = [b for b in segment(frame, params) if _touches(mask, b)]
    return track_displacement(before, after, params.mm_per_px)


def measure_fiducial_mm_per_px(
    frame: np.ndarray, known_mm: float, brightness_threshold: int = 250
) -> float:
    """Pixel scale from the calibration bar of known physical length.

    The bar is the widest saturated component in the frame.
    """
    binary = threshold(frame, brightness_threshold)
    boxes = find_bounding_boxes(binary, min_area=20)
    if not boxes:
        raise ValueError("no calibration bar found in frame")
    bar = max(boxes, key=lambda b: b.w)
    return known_mm / bar.w
