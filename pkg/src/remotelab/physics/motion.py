"""Stepper-motor kinematics: step counts to linear travel.

Positions are kept as integer step counters everywhere; conversion to
micrometres is exact integer arithmetic, so repeated moves never accumulate
floating-point drift and a homed rig is bit-identical to a fresh one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class MotorSpec:
    """A stepper motor as seen by the driver (micro-stepping folded in)."""

    name: str
    step_angle_deg: float
    steps_per_rev: int
    max_step_rate: float  # steps per second

    def __post_init__(self):
        if self.step_angle_deg <= 0:
            raise ValueError("step_angle_deg must be positive")
        full_turn = self.steps_per_rev * self.step_angle_deg
        if abs(full_turn - 360.0) > 0.5:
            raise ValueError(
                f"steps_per_rev * step_angle_deg = {full_turn}, expected 360 +- 0.5"
            )
        if self.max_step_rate <= 0:
            raise ValueError("max_step_rate must be positive")


# The geared 28BYJ-48 exposes 0.0875 deg per step at the output shaft; the
# NEMA 17 runs behind an A4988 micro-stepping driver at 400 steps per turn.
MOTOR_28BYJ48 = MotorSpec("28byj-48", step_angle_deg=0.0875, steps_per_rev=4114, max_step_rate=500.0)
MOTOR_NEMA17 = MotorSpec("nema-17", step_angle_deg=0.9, steps_per_rev=400, max_step_rate=4000.0)

MOTORS = {m.name: m for m in (MOTOR_28BYJ48, MOTOR_NEMA17)}


def steps_to_um(steps: int, step_len_um: int = 10) -> int:
    """Exact linear travel in micrometres for a screw/belt drive."""
    if steps < 0:
        raise ValueError(f"steps must be non-negative, got {steps}")
    return steps * step_len_um


def steps_to_mm(steps: int, step_len_um: int = 10) -> float:
    """Linear travel in millimetres for a screw/belt drive (10 um per step)."""
    return steps_to_um(steps, step_len_um) / 1000.0


def steps_to_arc_mm(steps: int, motor: MotorSpec, pulley_radius_mm: float) -> float:
    """Travel of a line spooled over a pulley: arc length of the turned angle."""
    if steps < 0:
        raise ValueError(f"steps must be non-negative, got {steps}")
    return steps * motor.step_angle_deg * math.pi / 180.0 * pulley_radius_mm


def travel_time_ms(steps: int, motor: MotorSpec) -> float:
    """How long a move of `steps` takes at the motor's maximum step rate."""
    return abs(steps) / motor.max_step_rate * 1000.0
