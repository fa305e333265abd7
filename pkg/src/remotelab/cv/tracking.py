"""Displacement tracking and motion verdicts over detected boxes."""

from __future__ import annotations

from dataclasses import dataclass, field

from .ops import Box


@dataclass(frozen=True)
class BoxMatch:
    """One before-box paired with its nearest after-box."""

    before: Box
    after: Box
    dx_mm: float
    dy_mm: float

    @property
    def distance_mm(self) -> float:
        return (self.dx_mm**2 + self.dy_mm**2) ** 0.5


@dataclass
class TrackResult:
    matches: list[BoxMatch]
    unmatched_before: list[Box]
    unmatched_after: list[Box]

    @property
    def complete(self) -> bool:
        return not self.unmatched_before and not self.unmatched_after


@dataclass
class MotionVerdict:
    commanded_mm: float
    observed_mm: float
    tolerance_mm: float
    passed: bool
    reason: str = ""
    trace: list[BoxMatch] = field(default_factory=list)


def track_displacement(
    boxes_before: list[Box],
    boxes_after: list[Box],
    mm_per_px: float,
) -> TrackResult:
    """Greedy nearest-centroid matching; displacements in millimetres.

    Unequal box counts leave the extras unmatched and flag the result partial.
    """
    if mm_per_px <= 0:
        raise ValueError(f"mm_per_px must be positive, got {mm_per_px}")
    remaining = list(boxes_after)
    matches: list[BoxMatch] = []
    unmatched_before: list[Box] = []
    pairs: list[tuple[float, Box, Box]] = [
        (
            (b.cx - a.cx) ** 2 + (b.cy - a.cy) ** 2,
            a,
            b,
        )
        for a in boxes_before
        for b in remaining
    ]
    pairs.sort(key=lambda p: p[0])
    used_before: set[int] = set()
    used_after: set[int] = set()
    for _, a, b in pairs:
        if id(a) in used_before or id(b) in used_after:
            continue
        used_before.add(id(a))
        used_after.add(id(b))
        matches.append(
            BoxMatch(a, b, dx_mm=(b.cx - a.cx) * mm_per_px, dy_mm=(b.cy - a.cy) * mm_per_px)
        )
    unmatched_before = [a for a in boxes_before if id(a) not in used_before]
    unmatched_after = [b for b in remaining if id(b) not in used_after]
    matches.sort(key=lambda m: m.before.x)
    return TrackResult(matches, unmatched_before, unmatched_after)


def verify_motion(
    commanded_mm: float,
    result: TrackResult,
    tolerance_mm: float = 0.5,
    axis: str = "x",
) -> MotionVerdict:
    """Pass when the most-displaced box moved the commanded distance.

    The actuated platform is the component with the largest displacement along
    `axis`; stationary scenery matches to itself at ~0 and is ignored.
    """
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    if not result.matches:
        return MotionVerdict(
            commanded_mm=commanded_mm,
            observed_mm=0.0,
            tolerance_mm=tolerance_mm,
            passed=False,
            reason="no-detection",
        )
    component = [m.dx_mm if axis == "x" else m.dy_mm for m in result.matches]
    observed = max(component, key=abs)
    passed = abs(observed - commanded_mm) <= tolerance_mm
    reason = "" if passed else (
        f"observed {observed:.3f} mm vs commanded {commanded_mm:.3f} mm "
        f"(tolerance {tolerance_mm} mm)"
    )
    return MotionVerdict(
        commanded_mm=commanded_mm,
        observed_mm=observed,
        tolerance_mm=tolerance_mm,
        passed=passed,
        reason=reason,
        trace=result.matches,
    )
