import json
import threading

import pytest

from remotelab.clock import VirtualScheduler
from remotelab.cloud import (
    BadPinError,
    PinCloud,
    UnknownTokenError,
)


@pytest.fixture
def cloud():
    return PinCloud(VirtualScheduler(), tokens=("devA", "devB"))


def test_write_read_round_trip(cloud):
    cloud.update_pin("devA", "V0", "1")
    assert cloud.get_pin("devA", "V0") == 1


def test_unwritten_pin_reads_null(cloud):
    assert cloud.get_pin("devA", "V5") is None


def test_numeric_coercion(cloud):
    cloud.update_pin("devA", "V1", 42)
    assert cloud.get_pin("devA", "V1") == 42
    cloud.update_pin("devA", "V2", "3.25")
    assert cloud.get_pin("devA", "V2") == 3.25
    cloud.update_pin("devA", "V9", "E02")
    assert cloud.get_pin("devA", "V9") == "E02"


def test_unknown_token_rejected(cloud):
    with pytest.raises(UnknownTokenError):
        cloud.update_pin("intruder", "V0", "1")
    with pytest.raises(UnknownTokenError):
        cloud.get_pin("intruder", "V0")
    with pytest.raises(UnknownTokenError):
        cloud.heartbeat("intruder")


def test_malformed_pin_rejected(cloud):
    for bad in ("X0", "V", "v1", "V1a", ""):
        with pytest.raises(BadPinError):
            cloud.update_pin("devA", bad, "1")


def test_token_namespace_isolation(cloud):
    cloud.update_pin("devA", "V0", "alpha")
    cloud.update_pin("devB", "V0", "beta")
    assert cloud.get_pin("devA", "V0") == "alpha"
    assert cloud.get_pin("devB", "V0") == "beta"


def test_pins_snapshot(cloud):
    cloud.update_pin("devA", "V0", "20.0")
    cloud.update_pin("devA", "V1", "20.5")
    assert cloud.pins("devA") == {"V0": 20.0, "V1": 20.5}


def test_heartbeat_ttl():
    scheduler = VirtualScheduler()
    cloud = PinCloud(scheduler, tokens=("devA",), heartbeat_ttl_ms=10_000)
    assert not cloud.is_connected("devA")
    cloud.heartbeat("devA")
    scheduler.run_for(1_000)
    assert cloud.is_connected("devA")
    scheduler.run_for(29_000)
    assert not cloud.is_connected("devA")
    assert not cloud.is_connected("never-registered")


def test_journal_recovery(tmp_path):
    journal = tmp_path / "cloud.ndjson"
    scheduler = VirtualScheduler()
    cloud = PinCloud(scheduler, tokens=("devA",), journal_path=journal)
    cloud.update_pin("devA", "V0", "20.0")
    cloud.update_pin("devA", "V0", "21.5")
    cloud.update_pin("devA", "V9", "E03")
    cloud.close()

    records = [json.loads(line) for line in journal.read_text().splitlines()]
    assert [r["value"] for r in records] == ["20.0", "21.5", "E03"]

    recovered = PinCloud(VirtualScheduler(), journal_path=journal)
    assert recovered.get_pin("devA", "V0") == 21.5
    assert recovered.get_pin("devA", "V9") == "E03"
    recovered.close()


def test_concurrent_writers_last_write_wins(tmp_path):
    journal = tmp_path / "cloud.ndjson"
    cloud = PinCloud(VirtualScheduler(), tokens=("devA",), journal_path=journal)
    values = [f"val-{i}" for i in range(32)]
    threads = [
        threading.Thread(target=cloud.update_pin, args=("devA", "V0", v)) for v in values
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    final = cloud.get_pin("devA", "V0")
    assert final in values
    cloud.close()
    # the recorded history agrees: the last journalled write is what reads back
    history = [json.loads(line)["value"] for line in journal.read_text().splitlines()]
    assert sorted(history) == sorted(values)
    assert history[-1] == final
