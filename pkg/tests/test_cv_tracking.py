import pytest

from remotelab.cv import (
    PipelineParams,
    detect_moved_boxes,
    measure_fiducial_mm_per_px,
    track_displacement,
    verify_motion,
)
from remotelab.cv.ops import Box, find_bounding_boxes
from remotelab.physics import FIDUCIAL_MM, MM_PER_PX_SIDE, LensBenchState, render_frame


def box_at(cx: float, cy: float, size: int = 10, area: int = 100) -> Box:
    return Box(
        x=int(cx - size / 2),
        y=int(cy - size / 2),
        w=size,
        h=size,
        area=area,
        cx=cx,
        cy=cy,
    )


def test_identical_box_sets_track_to_zero():
    boxes = [box_at(30, 30), box_at(90, 40)]
    result = track_displacement(boxes, list(boxes), mm_per_px=0.125)
    assert result.complete
    assert all(m.dx_mm == 0.0 and m.dy_mm == 0.0 for m in result.matches)


def test_forty_pixels_is_five_millimetres():
    result = track_displacement([box_at(100, 50)], [box_at(140, 50)], mm_per_px=0.125)
    assert result.matches[0].dx_mm == pytest.approx(5.0)


def test_opposite_moves_give_signed_displacements():
    before = [box_at(60, 50), box_at(200, 50)]
    after = [box_at(40, 50), box_at(230, 50)]
    result = track_displacement(before, after, mm_per_px=0.125)
    dxs = sorted(m.dx_mm for m in result.matches)
    assert dxs[0] == pytest.approx(-2.5)
    assert dxs[1] == pytest.approx(3.75)


def test_unequal_counts_flagged_partial():
    result = track_displacement([box_at(10, 10), box_at(50, 50)], [box_at(11, 10)], 1.0)
    assert not result.complete
    assert len(result.matches) == 1
    assert len(result.unmatched_before) == 1


def test_bad_calibration_rejected():
    with pytest.raises(ValueError):
        track_displacement([], [], mm_per_px=0.0)


def test_verify_motion_pass_and_fail():
    ok = track_displacement([box_at(100, 50)], [box_at(140, 50)], 0.125)
    verdict = verify_motion(5.0, ok, tolerance_mm=0.5)
    assert verdict.passed
    assert verdict.observed_mm == pytest.approx(5.0)

    stalled = track_displacement([box_at(100, 50)], [box_at(116, 50)], 0.125)
    verdict = verify_motion(5.0, stalled, tolerance_mm=0.5)
    assert not verdict.passed
    assert "observed" in verdict.reason


def test_verify_motion_no_detection():
    empty = track_displacement([], [], 0.125)
    verdict = verify_motion(5.0, empty)
    assert not verdict.passed
    assert verdict.reason == "no-detection"


def test_fiducial_calibration_recovers_renderer_scale():
    frame = render_frame(LensBenchState(), "side", seed=2)
    mm_per_px = measure_fiducial_mm_per_px(frame.pixels, FIDUCIAL_MM)
    assert mm_per_px == pytest.approx(MM_PER_PX_SIDE, rel=0.01)


def test_end_to_end_screen_platform_move():
    # The renderer moves the screen platform +500 steps = 5 mm; the pipeline
    # must recover that displacement to within 2 px of ground truth.
    params = PipelineParams(mm_per_px=MM_PER_PX_SIDE)
    before_state = LensBenchState()
    after_state = LensBenchState(v_steps=before_state.v_steps + 500)
    baseline = render_frame(before_state, "side", seed=31).pixels
    frame = render_frame(after_state, "side", seed=32).pixels

    result = detect_moved_boxes(baseline, frame, params)
    assert result.matches, "moving platform not detected"
    verdict = verify_motion(5.0, result, tolerance_mm=2 * MM_PER_PX_SIDE)
    assert verdict.passed, verdict.reason


def test_static_scene_detects_no_movers():
    params = PipelineParams(mm_per_px=MM_PER_PX_SIDE)
    a = render_frame(LensBenchState(), "side", seed=41).pixels
    b = render_frame(LensBenchState(), "side", seed=42).pixels
    result = detect_moved_boxes(a, b, params)
    assert not result.matches


def test_pipeline_deterministic():
    params = PipelineParams(mm_per_px=MM_PER_PX_SIDE)
    baseline = render_frame(LensBenchState(), "side", seed=5).pixels
    frame = render_frame(LensBenchState(v_steps=20400), "side", seed=6).pixels
    r1 = detect_moved_boxes(baseline, frame, params)
    r2 = detect_moved_boxes(baseline.copy(), frame.copy(), params)
    assert [(m.before, m.after) for m in r1.matches] == [(m.before, m.after) for m in r2.matches]


def test_segmentation_boxes_match_scene_objects():
    # sanity: the side view yields the fiducial, the joined post+rail, and the
    # two platforms as bright components
    frame = render_frame(LensBenchState(), "side", seed=7, noise_sigma=0.0)
    from remotelab.cv import threshold

    boxes = find_bounding_boxes(threshold(frame.pixels, 80), min_area=50)
    assert len(boxes) == 4
    assert sorted(b.area for b in boxes)[:3] == [1200, 1200, 1200]
