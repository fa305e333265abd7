"""Thin-lens relations for the focal-length bench.

Distances are unsigned magnitudes in centimetres: the bench measures how far
the object and screen platforms sit from the lens, and real images on the
screen side satisfy 1/f = 1/u + 1/v in those magnitudes.
"""

from __future__ import annotations

import math

AT_INFINITY = math.inf


def compute_focal_length(u_cm: float, v_cm: float) -> float:
    """Focal length from measured object and image distances.

    Raises ValueError for non-positive distances.
    """
    if u_cm <= 0 or v_cm <= 0:
        raise ValueError(f"distances must be positive, got u={u_cm} v={v_cm}")
    return 1.0 / (1.0 / u_cm + 1.0 / v_cm)


def percent_error(f_measured_cm: float, f_nominal_cm: float) -> float:
    """Unsigned percentage deviation of a measurement from the nominal value."""
    if f_nominal_cm <= 0:
        raise ValueError(f"nominal focal length must be positive, got {f_nominal_cm}")
    return 100.0 * abs(f_measured_cm - f_nominal_cm) / f_nominal_cm


def ideal_image_distance(u_cm: float, f_cm: float) -> float:
    """Screen distance that focuses an object at `u_cm` through a lens of `f_cm`.

    Returns AT_INFINITY (math.inf) when the object sits at or inside the focal
    point, where no real image forms.
    """
    if u_cm <= 0:
        raise ValueError(f"object distance must be positive, got {u_cm}")
    if u_cm <= f_cm:
        return AT_INFINITY
    return 1.0 / (1.0 / f_cm - 1.0 / u_cm)


def magnification(u_cm: float, v_cm: float) -> float:
    """Linear image magnification v/u for a focused pair of distances."""
    if u_cm <= 0:
        raise ValueError(f"object distance must be positive, got {u_cm}")
    return v_cm / u_cm
