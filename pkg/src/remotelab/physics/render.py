"""Synthetic camera rendering for the simulated rigs.

Three views exist:

* ``screen`` (lens bench): the image cast on the screen platform, an inverted
  arrow whose size follows the magnification v/u and whose defocus blur grows
  linearly with the screen's distance from the ideal image plane.
* ``side`` (lens bench): a schematic side view used by the vision checks. Each
  platform is drawn displaced from its home anchor at a fixed pixel scale
  (0.125 mm per pixel) around the lens post, with a calibration bar of known
  physical length along the top. Full bench positions do not fit a frame at
  that scale, so the view is a motion window, not a floor plan.
* ``rod`` (vanishing-rod rig): two beakers with the rods drawn segment by
  segment; a segment's contrast against its surrounding medium scales with the
  refractive-index gap, so the rod fades where the indices nearly match.

Rendering is a pure function of (state, camera, seed): the same inputs give a
bit-identical frame.
"""

from __future__ import annotations

import numpy as np

from .frame import DEFAULT_HEIGHT, DEFAULT_WIDTH, Frame
from .optics import ideal_image_distance
from .state import LensBenchState, RodRigState

K_BLUR_PX_PER_CM = 4.0
SIGMA_CAP_PX = 30.0
NOISE_SIGMA_DEFAULT = 2.0

# Side-view geometry.
MM_PER_PX_SIDE = 0.125
FIDUCIAL_MM = 25.0
SIDE_OBJECT_ANCHOR_X = 70
SIDE_SCREEN_ANCHOR_X = 250

# Visibility mapping for the rod rig: an index gap of 0.14 (glass against
# water) renders at full contrast, smaller gaps proportionally fainter.
CONTRAST_DELTA_MU_REF = 0.14

# Rod-view geometry.
MM_PER_PX_ROD = 0.25
ROD_BACKDROP = 170
ROD_AMPLITUDE = 110

CAMERA_VIEWS = ("screen", "side", "rod")


class UnknownCameraError(ValueError):
    pass


def rod_contrast(mu_rod: float, mu_medium: float) -> float:
    """Visibility of a rod segment inside a medium, clamped to [0, 1]."""
    return min(max(abs(mu_rod - mu_medium) / CONTRAST_DELTA_MU_REF, 0.0), 1.0)


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized sampled Gaussian, truncated at 3 sigma."""
    radius = max(1, int(np.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with edge replication at the borders."""
    if sigma <= 0:
        return image.astype(np.float64, copy=True)
    kernel = gaussian_kernel1d(sigma)
    radius = len(kernel) // 2
    img = image.astype(np.float64)
    padded = np.pad(img, ((0, 0), (radius, radius)), mode="edge")
    rows = np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="valid"), 1, padded)
    padded = np.pad(rows, ((radius, radius), (0, 0)), mode="edge")
    return np.apply_along_axis(lambda c: np.convolve(c, kernel, mode="valid"), 0, padded)


def _quantize(canvas: np.ndarray, seed: int, noise_sigma: float) -> np.ndarray:
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        canvas = canvas + rng.normal(0.0, noise_sigma, size=canvas.shape)
    return np.clip(np.rint(canvas), 0, 255).astype(np.uint8)


def _render_lens_screen(state: LensBenchState, width: int, height: int) -> np.ndarray:
    canvas = np.full((height, width), 12.0)
    if not state.light_on:
        return canvas
    canvas[:] = 40.0  # lit screen glow

    u, v = state.u_cm, state.v_cm
    if u <= 0:
        return canvas
    v_ideal = ideal_image_distance(u, state.focal_len_cm)
    if np.isinf(v_ideal):
        sigma = SIGMA_CAP_PX
    else:
        sigma = min(K_BLUR_PX_PER_CM * abs(v - v_ideal), SIGMA_CAP_PX)

    # Inverted arrow: stem with the head pointing down, scaled by v/u.
    m = v / u
    cx, cy = width // 2, height // 2
    stem_h = max(2, int(round(70 * m)))
    stem_w = max(2, int(round(12 * m)))
    head_h = max(2, int(round(26 * m)))
    head_w = max(4, int(round(34 * m)))
    glyph = np.zeros_like(canvas)
    top = cy - (stem_h + head_h) // 2
    x0 = cx - stem_w // 2
    glyph[max(0, top) : min(height, top + stem_h), max(0, x0) : min(width, x0 + stem_w)] = 1.0
    for i in range(head_h):  # downward-pointing triangle
        frac = 1.0 - i / head_h
        half = max(1, int(round(head_w * frac / 2)))
        y = top + stem_h + i
        if 0 <= y < height:
            glyph[y, max(0, cx - half) : min(width, cx + half)] = 1.0

    canvas = canvas + 190.0 * glyph
    if sigma > 0:
        canvas = gaussian_blur(canvas, sigma)
    return canvas


def _render_lens_side(state: LensBenchState, width: int, height: int) -> np.ndarray:
    canvas = np.zeros((height, width))

    # Calibration bar of a known physical length.
    fid_px = int(round(FIDUCIAL_MM / MM_PER_PX_SIDE))
    fx0 = (width - fid_px) // 2
    canvas[18:24, fx0 : fx0 + fid_px] = 255.0

    canvas[170:174, :] = 90.0  # bench rail
    cx = width // 2
    canvas[70:170, cx - 3 : cx + 3] = 140.0  # lens post

    # Platforms float clear of the rail so closing never merges them with it.
    def platform(anchor_x: int, delta_steps: int, sign: int, shade: float) -> None:
        dx = sign * (delta_steps * state.step_len_um / 1000.0) / MM_PER_PX_SIDE
        x = int(round(anchor_x + dx))
        x0, x1 = max(0, x - 15), min(width, x + 15)
        if x1 > x0:
            canvas[124:164, x0:x1] = shade

    # Larger u moves the object away from the lens (to the left); larger v
    # moves the screen to the right.
    platform(SIDE_OBJECT_ANCHOR_X, state.u_steps - state.home_u_steps, -1, 220.0)
    platform(SIDE_SCREEN_ANCHOR_X, state.v_steps - state.home_v_steps, +1, 200.0)
    return canvas


def _render_rod_rig(state: RodRigState, width: int, height: int) -> np.ndarray:
    canvas = np.full((height, width), float(ROD_BACKDROP))
    beaker_top, beaker_bot = 90, 210
    beakers = (
        (100, state.mu_oil, state.oil_level_frac),
        (220, state.mu_water, state.water_level_frac),
    )

    lowered_px = state.lowered_mm / MM_PER_PX_ROD
    tip_y = 60.0 + lowered_px
    rod_len = 40
    immersion_surface_y = 120  # rods cross the liquid at the nominal 0.75 fill

    for bx, mu_medium, level_frac in beakers:
        surface_y = int(round(beaker_bot - level_frac * (beaker_bot - beaker_top)))
        half_w = 40
        liquid_shade = ROD_BACKDROP - 30.0
        canvas[surface_y:beaker_bot, bx - half_w + 3 : bx + half_w - 3] = liquid_shade
        canvas[surface_y : surface_y + 2, bx - half_w + 3 : bx + half_w - 3] = 60.0
        # Beaker walls and base have air outside: always fully visible.
        canvas[beaker_top:beaker_bot, bx - half_w : bx - half_w + 3] = 60.0
        canvas[beaker_top:beaker_bot, bx + half_w - 3 : bx + half_w] = 60.0
        canvas[beaker_bot : beaker_bot + 3, bx - half_w : bx + half_w] = 60.0

        # Rod: the part above the liquid line sits in air (full contrast); the
        # part below takes the contrast of the index gap with the liquid.
        y_tip = int(round(tip_y))
        y_top = y_tip - rod_len
        rx0, rx1 = bx - 5, bx + 5
        c_air = rod_contrast(state.mu_rod, state.mu_air)
        c_liquid = rod_contrast(state.mu_rod, mu_medium)
        air_top = max(0, y_top)
        air_bot = min(y_tip, immersion_surface_y)
        if air_bot > air_top:
            canvas[air_top:air_bot, rx0:rx1] = ROD_BACKDROP - ROD_AMPLITUDE * c_air
        liq_top = max(air_top, immersion_surface_y)
        if y_tip > liq_top:
            canvas[liq_top:y_tip, rx0:rx1] = liquid_shade - ROD_AMPLITUDE * c_liquid

        # Holder block above the rod (opaque, always visible): gives the
        # vision pipeline a trackable moving part on both sides.
        h_top = max(0, y_top - 14)
        canvas[h_top : max(0, y_top), bx - 12 : bx + 12] = 30.0

    return canvas


def render_view(
    state: LensBenchState | RodRigState,
    camera: str,
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
) -> np.ndarray:
    """Noise-free float canvas for a camera view. Raises UnknownCameraError."""
    state.validate()
    if isinstance(state, LensBenchState):
        if camera == "screen":
            return _render_lens_screen(state, width, height)
        if camera == "side":
            return _render_lens_side(state, width, height)
    if isinstance(state, RodRigState) and camera == "rod":
        return _render_rod_rig(state, width, height)
    raise UnknownCameraError(f"camera {camera!r} not valid for {type(state).__name__}")


def render_frame(
    state: LensBenchState | RodRigState,
    camera: str,
    seed: int = 0,
    noise_sigma: float = NOISE_SIGMA_DEFAULT,
    timestamp_ms: float = 0.0,
    camera_id: str = "",
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
) -> Frame:
    """Render one camera frame with seeded sensor noise."""
    canvas = render_view(state, camera, width, height)
    pixels = _quantize(canvas, seed, noise_sigma)
    return Frame(pixels, timestamp_ms=timestamp_ms, camera_id=camera_id or camera)


def sharpness_metric(frame: Frame | np.ndarray) -> float:
    """Variance of the discrete Laplacian; 0 for a uniform frame.

    Higher is sharper: defocus blur suppresses the high-frequency content the
    Laplacian responds to.
    """
    pixels = frame.pixels if isinstance(frame, Frame) else np.asarray(frame)
    img = pixels.astype(np.float64)
    lap = (
        img[:-2, 1:-1] + img[2:, 1:-1] + img[1:-1, :-2] + img[1:-1, 2:] - 4.0 * img[1:-1, 1:-1]
    )
    return float(lap.var())
