"""Deterministic physics for the simulated rigs: optics, kinematics, rendering."""

from .frame import (
    DEFAULT_HEIGHT,
    DEFAULT_WIDTH,
    Frame,
    decode_pgm,
    encode_pgm,
    parse_pgm_metadata,
)
from .motion import (
    MOTOR_28BYJ48,
    MOTOR_NEMA17,
    MOTORS,
    MotorSpec,
    steps_to_arc_mm,
    steps_to_mm,
    steps_to_um,
    travel_time_ms,
)
from .optics import (
    AT_INFINITY,
    compute_focal_length,
    ideal_image_distance,
    magnification,
    percent_error,
)
from .render import (
    CONTRAST_DELTA_MU_REF,
    K_BLUR_PX_PER_CM,
    MM_PER_PX_ROD,
    MM_PER_PX_SIDE,
    FIDUCIAL_MM,
    UnknownCameraError,
    gaussian_blur,
    gaussian_kernel1d,
    render_frame,
    render_view,
    rod_contrast,
    sharpness_metric,
)
from .state import ExperimentState, LensBenchState, RodRigState

__all__ = [
    "AT_INFINITY",
    "CONTRAST_DELTA_MU_REF",
    "DEFAULT_HEIGHT",
    "DEFAULT_WIDTH",
    "FIDUCIAL_MM",
    "Frame",
    "K_BLUR_PX_PER_CM",
    "MM_PER_PX_ROD",
    "MM_PER_PX_SIDE",
    "MOTOR_28BYJ48",
    "MOTOR_NEMA17",
    "MOTORS",
    "MotorSpec",
    "ExperimentState",
    "LensBenchState",
    "RodRigState",
    "UnknownCameraError",
    "compute_focal_length",
    "decode_pgm",
    "encode_pgm",
    "parse_pgm_metadata",
    "gaussian_blur",
    "gaussian_kernel1d",
    "ideal_image_distance",
    "magnification",
    "percent_error",
    "render_frame",
    "render_view",
    "rod_contrast",
    "sharpness_metric",
    "steps_to_arc_mm",
    "steps_to_mm",
    "steps_to_um",
    "travel_time_ms",
]
