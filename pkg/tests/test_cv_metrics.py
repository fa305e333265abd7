import numpy as np
import pytest

from remotelab.cv import SSIM_C1, ssim


def test_identical_images_score_exactly_one():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(60, 80), dtype=np.uint8)
    assert ssim(img, img) == 1.0
    assert ssim(img.copy(), img) == 1.0


def test_black_versus_white():
    a = np.zeros((50, 50), dtype=np.uint8)
    b = np.full((50, 50), 255, dtype=np.uint8)
    expected = SSIM_C1 / (255.0**2 + SSIM_C1)
    score = ssim(a, b)
    assert score == pytest.approx(expected, abs=1e-12)
    assert score == pytest.approx(1.0e-4, abs=1e-5)


def test_symmetry():
    rng = np.random.default_rng(4)
    a = rng.integers(0, 256, size=(40, 40), dtype=np.uint8)
    b = rng.integers(0, 256, size=(40, 40), dtype=np.uint8)
    assert ssim(a, b) == ssim(b, a)


def test_small_perturbation_scores_high():
    rng = np.random.default_rng(5)
    a = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
    b = a.copy()
    b[10, 10] ^= 0xFF
    assert ssim(a, b) > 0.95


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        ssim(np.zeros((4, 4)), np.zeros((4, 5)))


def test_score_stays_in_range_on_random_pairs():
    rng = np.random.default_rng(6)
    for _ in range(50):
        a = rng.integers(0, 256, size=(32, 32), dtype=np.uint8)
        b = rng.integers(0, 256, size=(32, 32), dtype=np.uint8)
        score = ssim(a, b)
        assert -1.0 <= score <= 1.0


def test_scene_drift_detectable_below_threshold():
    # A lowered water level must push the score under the 0.98 alert line.
    from remotelab.physics import RodRigState, render_frame

    healthy = render_frame(RodRigState(), "rod", seed=21)
    drifted = render_frame(
        RodRigState(water_level_frac=0.45), "rod", seed=22
    )
    rerendered = render_frame(RodRigState(), "rod", seed=23)
    assert ssim(healthy.pixels, rerendered.pixels) > 0.98  # noise alone stays high
    assert ssim(healthy.pixels, drifted.pixels) < 0.98
