"""Platform configuration: JSON schema, validation, round-trip serialization."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .signaling import CAMERA_PROFILES_MS


class ConfigError(Exception):
    pass


@dataclass
class CameraSpec:
    camera_id: str
    view: str  # screen | side | rod
    profile: str = "pi3b"


@dataclass
class AgentSpec:
    device_id: str
    credentials: str
    cloud_token: str
    cameras: list[CameraSpec]
    role: str = "control"


@dataclass
class NodeSpec:
    node_id: str
    agents: list[AgentSpec]
    physics: dict = field(default_factory=dict)
    faults: dict = field(default_factory=dict)

    @property
    def control_agent(self) -> AgentSpec:
        for agent in self.agents:
            if agent.role == "control":
                return agent
        raise ConfigError(f"node {self.node_id} has no control agent")


FL_PIN_MAP = {
    "V0": "u_cm",
    "V1": "v_cm",
    "V2": "occupancy_flag",
    "V3": "input_target",
    "V4": "input_steps",
    "V9": "error_code",
}
VR_PIN_MAP = {
    "V0": "rod_lowered_mm",
    "V2": "occupancy_flag",
    "V3": "input_direction",
    "V4": "input_steps",
    "V9": "error_code",
}


@dataclass
class ExperimentSpec:
    experiment_id: str
    kind: str  # FL | VR
    nodes: list[NodeSpec]
    # informational: the pin conventions this experiment's devices follow
    pin_map: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.pin_map:
            self.pin_map = dict(FL_PIN_MAP if self.kind == "FL" else VR_PIN_MAP)


@dataclass
class UserSpec:
    username: str
    secret: str


@dataclass
class TesterSpec:
    interval_s: float = 8 * 3600.0
    readings_per_day: int = 3
    ledger_path: str = "data/ledger.ndjson"
    sink: dict = field(default_factory=lambda: {"kind": "file", "path": "data/notifications.ndjson"})
    tolerance_mm: float = 0.5
    username: str = "virtual-tester"
    secret: str = "virtual-tester-secret"


@dataclass
class PlatformConfig:
    experiments: list[ExperimentSpec]
    users: list[UserSpec] = field(default_factory=list)
    tester: TesterSpec = field(default_factory=TesterSpec)
    orchestrator_bind: str = "127.0.0.1:8700"
    cloud_bind: str = "127.0.0.1:8701"
    signaling_bind: str = "127.0.0.1:8702"
    session_duration_s: float = 300.0
    heartbeat_ttl_s: float = 10.0
    camera_profiles_ms: dict = field(default_factory=lambda: dict(CAMERA_PROFILES_MS))
    rng_seed: int = 1234
    data_dir: str | None = None

    def validate(self) -> None:
        seen_nodes: set[str] = set()
        seen_devices: set[str] = set()
        seen_tokens: set[str] = set()
        seen_cameras: set[str] = set()
        seen_experiments: set[str] = set()
        if not self.experiments:
            raise ConfigError("at least one experiment required")
        for exp in self.experiments:
            if exp.experiment_id in seen_experiments:
                raise ConfigError(f"duplicate experiment id {exp.experiment_id!r}")
            seen_experiments.add(exp.experiment_id)
            if exp.kind not in ("FL", "VR"):
                raise ConfigError(f"experiment {exp.experiment_id}: kind must be FL or VR")
            for node in exp.nodes:
                if node.node_id in seen_nodes:
                    raise ConfigError(f"duplicate node id {node.node_id!r}")
                seen_nodes.add(node.node_id)
                node.control_agent  # raises when missing
                for agent in node.agents:
                    if agent.device_id in seen_devices:
                        raise ConfigError(f"duplicate device id {agent.device_id!r}")
                    seen_devices.add(agent.device_id)
                    if agent.cloud_token in seen_tokens:
                        raise ConfigError(f"duplicate cloud token {agent.cloud_token!r}")
                    seen_tokens.add(agent.cloud_token)
                    if not agent.credentials:
                        raise ConfigError(f"device {agent.device_id}: empty credentials")
                    if not agent.cameras:
                        raise ConfigError(f"device {agent.device_id}: at least one camera")
                    for camera in agent.cameras:
                        if camera.camera_id in seen_cameras:
                            raise ConfigError(f"duplicate camera id {camera.camera_id!r}")
                        seen_cameras.add(camera.camera_id)
                        if camera.profile not in self.camera_profiles_ms:
                            raise ConfigError(
                                f"camera {camera.camera_id}: unknown profile {camera.profile!r}"
                            )

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(asdict(self), indent=indent, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, raw: dict) -> "PlatformConfig":
        try:
            experiments = [
                ExperimentSpec(
                    experiment_id=e["experiment_id"],
                    kind=e["kind"],
                    pin_map=e.get("pin_map", {}),
                    nodes=[
                        NodeSpec(
                            node_id=n["node_id"],
                            agents=[
                                AgentSpec(
                                    device_id=a["device_id"],
                                    credentials=a["credentials"],
                                    cloud_token=a["cloud_token"],
                                    role=a.get("role", "control"),
                                    cameras=[CameraSpec(**c) for c in a["cameras"]],
                                )
                                for a in n["agents"]
                            ],
                            physics=n.get("physics", {}),
                            faults=n.get("faults", {}),
                        )
                        for n in e["nodes"]
                    ],
                )
                for e in raw["experiments"]
            ]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        users = [UserSpec(**u) for u in raw.get("users", [])]
        tester = TesterSpec(**raw["tester"]) if "tester" in raw else TesterSpec()
        kwargs = {
            key: raw[key]
            for key in (
                "orchestrator_bind",
                "cloud_bind",
                "signaling_bind",
                "session_duration_s",
                "heartbeat_ttl_s",
                "camera_profiles_ms",
                "rng_seed",
                "data_dir",
            )
            if key in raw
        }
        config = cls(experiments=experiments, users=users, tester=tester, **kwargs)
        config.validate()
        return config

    @classmethod
    def from_json(cls, text: str) -> "PlatformConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "PlatformConfig":
        return cls.from_json(Path(path).read_text())


def default_config(
    fl_nodes: int = 1,
    vr_nodes: int = 1,
    users: int = 3,
    session_duration_s: float = 300.0,
    rng_seed: int = 1234,
) -> PlatformConfig:
    """A ready-to-run desk-scale fleet: FL nodes with two cameras, VR with one."""
    experiments = []
    if fl_nodes:
        experiments.append(
            ExperimentSpec(
                experiment_id="focal-length",
                kind="FL",
                nodes=[
                    NodeSpec(
                        node_id=f"fl-{i + 1}",
                        agents=[
                            AgentSpec(
                                device_id=f"fl-{i + 1}-ctrl",
                                credentials=f"secret-fl-{i + 1}-ctrl",
                                cloud_token=f"tok-fl-{i + 1}",
                                role="control",
                                cameras=[
                                    CameraSpec(f"fl-{i + 1}-screen", "screen", "pi3b")
                                ],
                            ),
                            AgentSpec(
                                device_id=f"fl-{i + 1}-stream",
                                credentials=f"secret-fl-{i + 1}-stream",
                                cloud_token=f"tok-fl-{i + 1}-s",
                                role="stream-only",
                                cameras=[CameraSpec(f"fl-{i + 1}-side", "side", "pi3b")],
                            ),
                        ],
                        physics={"focal_len_cm": 10.0, "step_len_um": 10},
                    )
                    for i in range(fl_nodes)
                ],
            )
        )
    if vr_nodes:
        experiments.append(
            ExperimentSpec(
                experiment_id="vanishing-rod",
                kind="VR",
                nodes=[
                    NodeSpec(
                        node_id=f"vr-{i + 1}",
                        agents=[
                            AgentSpec(
                                device_id=f"vr-{i + 1}-ctrl",
                                credentials=f"secret-vr-{i + 1}",
                                cloud_token=f"tok-vr-{i + 1}",
                                role="control",
                                cameras=[CameraSpec(f"vr-{i + 1}-cam", "rod", "pizero2w")],
                            )
                        ],
                        physics={},
                    )
                    for i in range(vr_nodes)
                ],
            )
        )
    return PlatformConfig(
        experiments=experiments,
        users=[UserSpec(f"user-{i + 1}", f"pw-{i + 1}") for i in range(users)],
        session_duration_s=session_duration_s,
        rng_seed=rng_seed,
    )
