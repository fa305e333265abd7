"""Walk the vision pipeline over a platform move, stage by stage.

The screen platform moves 500 steps (5 mm). Background subtraction lights up
the old and new positions, closing and median filtering clean the noise,
thresholding binarizes, boxes come from connected components, and the tracker
converts the centroid shift into millimetres.
"""

import numpy as np

from remotelab.cv import PipelineParams, detect_moved_boxes, verify_motion
from remotelab.cv.ops import find_bounding_boxes, median_filter, morph_close, subtract_background, threshold
from remotelab.cv.pipeline import measure_fiducial_mm_per_px
from remotelab.physics import FIDUCIAL_MM, LensBenchState, render_frame

before = render_frame(LensBenchState(), "side", seed=11).pixels
after = render_frame(LensBenchState(v_steps=20500), "side", seed=12).pixels

mm_per_px = measure_fiducial_mm_per_px(before, FIDUCIAL_MM)
print(f"calibration bar: {FIDUCIAL_MM} mm wide -> {mm_per_px:.4f} mm per pixel")

diff = subtract_background(after, before)
print(f"abs difference:  {np.count_nonzero(diff)} changed pixels, max {diff.max()}")

closed = morph_close(diff, 5)
filtered = median_filter(closed, 5)
binary = threshold(filtered, 30)
print(f"after close+median+threshold: {np.count_nonzero(binary)} foreground pixels")

boxes = find_bounding_boxes(binary, min_area=50)
print(f"change regions: {len(boxes)} boxes "
      f"(old and new platform positions) at x = {[b.x for b in boxes]}")

result = detect_moved_boxes(before, after, PipelineParams(mm_per_px=mm_per_px))
verdict = verify_motion(5.0, result, tolerance_mm=0.5, axis="x")
print(f"\ntracked displacement: {verdict.observed_mm:+.3f} mm "
      f"(commanded {verdict.commanded_mm:+.1f} mm) -> "
      f"{'PASS' if verdict.passed else 'FAIL'}")
