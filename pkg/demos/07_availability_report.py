"""Availability ledger replay: four months of checks in milliseconds.

Builds synthetic daily reading streams for both rigs over a 123-day window
(July through October), aggregates each day into Online / Partial / Offline,
and prints the per-month availability table plus the fleet uptime line.
"""

from remotelab.tester import (
    aggregate_ledger,
    day_plan,
    synthesize_reading_stream,
    uptime_summary,
)

vr = synthesize_reading_stream("vanishing-rod", day_plan(106, 8, 9, seed=21))
fl = synthesize_reading_stream("focal-length", day_plan(101, 12, 10, seed=22))
days = aggregate_ledger(vr + fl)

by_month: dict[tuple[str, str], dict] = {}
for day in days:
    bucket = by_month.setdefault(
        (day.experiment_id, day.date[:7]), {"Online": 0, "Partial": 0, "Offline": 0}
    )
    bucket[day.status] += 1

print(f"{'experiment':<16} {'month':<9} {'online':>7} {'partial':>8} {'offline':>8}")
for (experiment, month), counts in sorted(by_month.items()):
    print(
        f"{experiment:<16} {month:<9} {counts['Online']:>7} "
        f"{counts['Partial']:>8} {counts['Offline']:>8}"
    )

summary = uptime_summary(days)
print()
for experiment, stats in sorted(summary["experiments"].items()):
    print(
        f"{experiment:<16} {stats['days']} days: "
        f"{stats['Online']}/{stats['Partial']}/{stats['Offline']} "
        f"-> online {stats['online_fraction'] * 100:.1f} %"
    )
print(f"\nfleet online fraction: {summary['fleet_online_fraction'] * 100:.1f} %")
