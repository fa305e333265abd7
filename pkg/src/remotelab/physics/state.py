"""Value-type states of the two simulated rigs.

States are plain data: agents mutate copies through well-defined moves and the
renderer reads them. All positions are integer step counters.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .motion import MOTOR_28BYJ48, MOTOR_NEMA17, MotorSpec, steps_to_arc_mm


@dataclass
class LensBenchState:
    """Optical bench: object platform at u, screen platform at v, lens fixed."""

    u_steps: int = 20000
    v_steps: int = 20000
    step_len_um: int = 10
    focal_len_cm: float = 10.0
    bench_half_len_cm: float = 50.0
    light_on: bool = True
    home_u_steps: int = 20000
    home_v_steps: int = 20000
    motor: MotorSpec = field(default=MOTOR_NEMA17)

    @property
    def max_steps(self) -> int:
        return int(self.bench_half_len_cm * 1e4 / self.step_len_um)

    @property
    def u_cm(self) -> float:
        return self.u_steps * self.step_len_um / 1e4

    @property
    def v_cm(self) -> float:
        return self.v_steps * self.step_len_um / 1e4

    def validate(self) -> None:
        for name, steps in (("u_steps", self.u_steps), ("v_steps", self.v_steps)):
            if not 0 <= steps <= self.max_steps:
                raise ValueError(f"{name}={steps} outside [0, {self.max_steps}]")

    def clamp(self, steps: int) -> int:
        return min(max(steps, 0), self.max_steps)

    def homed(self) -> "LensBenchState":
        return replace(self, u_steps=self.home_u_steps, v_steps=self.home_v_steps)


@dataclass
class RodRigState:
    """Two glass rods over oil and water beakers, raised and lowered together.

    rod_height_steps counts steps of lowering: 0 is fully raised, travel_steps
    is fully dipped. The rods enter the liquid partway through the travel.
    """

    rod_height_steps: int = 0
    mu_rod: float = 1.5
    mu_oil: float = 1.47
    mu_water: float = 1.36
    mu_air: float = 1.0
    pulley_radius_mm: float = 10.0
    travel_steps: int = 2048
    immersion_start_mm: float = 10.0
    immersion_len_mm: float = 20.0
    water_level_frac: float = 0.75  # beaker fill height, fraction of beaker
    oil_level_frac: float = 0.75
    motor: MotorSpec = field(default=MOTOR_28BYJ48)

    @property
    def lowered_mm(self) -> float:
        return steps_to_arc_mm(self.rod_height_steps, self.motor, self.pulley_radius_mm)

    @property
    def submerged_fraction(self) -> float:
        frac = (self.lowered_mm - self.immersion_start_mm) / self.immersion_len_mm
        return min(max(frac, 0.0), 1.0)

    def validate(self) -> None:
        if not 0 <= self.rod_height_steps <= self.travel_steps:
            raise ValueError(
                f"rod_height_steps={self.rod_height_steps} outside [0, {self.travel_steps}]"
            )
        for name in ("mu_rod", "mu_oil", "mu_water", "mu_air"):
            if getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be >= 1")

    def clamp(self, steps: int) -> int:
        return min(max(steps, 0), self.travel_steps)

    def homed(self) -> "RodRigState":
        return replace(self, rod_height_steps=0)


ExperimentState = LensBenchState | RodRigState
