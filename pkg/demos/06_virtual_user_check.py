"""The automated tester in action: a healthy check, then a sabotaged one.

The virtual user logs in, enters, waits for the stream, actuates the rig,
verifies the motion with the vision pipeline, checks the error pin, and
leaves. Then we stall the motor and watch the same check fail and notify.
"""

import json
from pathlib import Path

from remotelab.config import default_config
from remotelab.platform import Platform
from remotelab.tester import NotificationSink, VirtualUser

notify_path = Path(__file__).parent / "out" / "notifications.ndjson"
notify_path.parent.mkdir(exist_ok=True)
notify_path.unlink(missing_ok=True)

platform = Platform(default_config(fl_nodes=1, vr_nodes=1, users=2))
platform.start()
user = VirtualUser(platform, NotificationSink({"kind": "file", "path": str(notify_path)}))


def narrate(report) -> None:
    print(f"  overall: {report.overall}")
    print(f"  stream ok: {report.stream_ok}, cloud connected: {report.cloud_connected}")
    for verdict in report.motion_verdicts:
        print(
            f"  motion: commanded {verdict.commanded_mm:+.2f} mm, "
            f"observed {verdict.observed_mm:+.2f} mm -> {'ok' if verdict.passed else 'FAIL'}"
        )
    for check in report.ssim_checks:
        print(f"  scene similarity: {check.score:.4f} (alert below {check.threshold})")
    if report.reasons:
        print(f"  reasons: {report.reasons}")


print("healthy focal-length check:")
narrate(user.run_check("focal-length"))

print("\nhealthy vanishing-rod check:")
narrate(user.run_check("vanishing-rod"))

print("\nnow the focal-length motor silently loses 60 % of its travel:")
platform.sims["fl-1"].faults.motor_stall = 0.6
narrate(user.run_check("focal-length"))

print(f"\nnotifications written to {notify_path}:")
for line in notify_path.read_text().splitlines():
    print(" ", json.loads(line)["reasons"])
