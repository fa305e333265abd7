import json

import pytest

from remotelab.config import (
    AgentSpec,
    CameraSpec,
    ConfigError,
    ExperimentSpec,
    NodeSpec,
    PlatformConfig,
    default_config,
)


def test_round_trip_identity():
    config = default_config(fl_nodes=2, vr_nodes=1, users=4)
    text = config.to_json()
    reparsed = PlatformConfig.from_json(text)
    assert reparsed.to_json() == text
    # and a second cycle stays fixed
    assert PlatformConfig.from_json(reparsed.to_json()).to_json() == text


def test_default_config_validates():
    default_config().validate()


def test_duplicate_token_rejected():
    config = default_config(fl_nodes=2)
    config.experiments[0].nodes[1].agents[0].cloud_token = (
        config.experiments[0].nodes[0].agents[0].cloud_token
    )
    with pytest.raises(ConfigError, match="duplicate cloud token"):
        config.validate()


def test_duplicate_node_rejected():
    config = default_config(fl_nodes=2)
    config.experiments[0].nodes[1].node_id = config.experiments[0].nodes[0].node_id
    with pytest.raises(ConfigError, match="duplicate node id"):
        config.validate()


def test_unknown_camera_profile_rejected():
    config = default_config()
    config.experiments[0].nodes[0].agents[0].cameras[0].profile = "gopro"
    with pytest.raises(ConfigError, match="unknown profile"):
        config.validate()


def test_node_without_control_agent_rejected():
    config = PlatformConfig(
        experiments=[
            ExperimentSpec(
                "exp",
                "FL",
                [
                    NodeSpec(
                        "n1",
                        agents=[
                            AgentSpec(
                                "d1", "sec", "tok", [CameraSpec("c1", "side")],
                                role="stream-only",
                            )
                        ],
                    )
                ],
            )
        ]
    )
    with pytest.raises(ConfigError, match="no control agent"):
        config.validate()


def test_empty_credentials_rejected():
    config = default_config()
    config.experiments[0].nodes[0].agents[0].credentials = ""
    with pytest.raises(ConfigError, match="empty credentials"):
        config.validate()


def test_malformed_json_raises_config_error():
    with pytest.raises(ConfigError):
        PlatformConfig.from_dict({"experiments": [{"bogus": True}]})


def test_save_and_load(tmp_path):
    path = tmp_path / "cfg.json"
    config = default_config()
    config.save(path)
    loaded = PlatformConfig.load(path)
    assert loaded.to_json() == config.to_json()
    assert json.loads(path.read_text())["session_duration_s"] == 300.0
