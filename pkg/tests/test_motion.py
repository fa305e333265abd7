import random

import pytest

from remotelab.physics import (
    MOTOR_28BYJ48,
    MOTOR_NEMA17,
    MotorSpec,
    steps_to_arc_mm,
    steps_to_mm,
    steps_to_um,
    travel_time_ms,
)


def test_single_step_is_ten_micrometres():
    assert steps_to_mm(1) == pytest.approx(0.01)
    assert steps_to_um(1) == 10


def test_full_revolution_is_four_millimetres():
    assert steps_to_mm(400) == pytest.approx(4.0)


def test_zero_steps():
    assert steps_to_mm(0) == 0.0
    assert steps_to_arc_mm(0, MOTOR_28BYJ48, 10.0) == 0.0


def test_negative_steps_rejected():
    with pytest.raises(ValueError):
        steps_to_um(-5)
    with pytest.raises(ValueError):
        steps_to_arc_mm(-5, MOTOR_28BYJ48, 10.0)


def test_additivity_is_exact_in_micrometres():
    rng = random.Random(42)
    for _ in range(500):
        a = rng.randrange(0, 100_000)
        b = rng.randrange(0, 100_000)
        assert steps_to_um(a + b) == steps_to_um(a) + steps_to_um(b)


def test_monotone_in_steps():
    last = -1.0
    for steps in range(0, 2000, 37):
        here = steps_to_mm(steps)
        assert here > last
        last = here


def test_pulley_arc_length():
    # 0.0875 deg at a 10 mm pulley is about 15.3 um of line travel.
    assert steps_to_arc_mm(1, MOTOR_28BYJ48, 10.0) == pytest.approx(0.01527, abs=1e-4)


def test_motor_spec_invariants():
    assert MOTOR_28BYJ48.step_angle_deg == 0.0875
    assert abs(MOTOR_NEMA17.steps_per_rev * MOTOR_NEMA17.step_angle_deg - 360.0) <= 0.5
    with pytest.raises(ValueError):
        MotorSpec("bogus", step_angle_deg=1.0, steps_per_rev=100, max_step_rate=100.0)
    with pytest.raises(ValueError):
        MotorSpec("bogus", step_angle_deg=-1.0, steps_per_rev=360, max_step_rate=100.0)


def test_travel_time():
    assert travel_time_ms(500, MOTOR_NEMA17) == pytest.approx(125.0)
    assert travel_time_ms(-500, MOTOR_NEMA17) == pytest.approx(125.0)
    assert travel_time_ms(500, MOTOR_28BYJ48) == pytest.approx(1000.0)
