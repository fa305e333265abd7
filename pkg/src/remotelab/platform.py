"""Assembles cloud, broker, orchestrator and agent fleet from a config.

One Platform instance is a full in-process deployment. With a virtual
scheduler it is a deterministic simulation; with the real-time scheduler the
same wiring backs the live HTTP servers.
"""

from __future__ import annotations

from .agent import AgentConfig, CameraConfig, DeviceAgent, FaultConfig, NodeSim
from .clock import Scheduler, VirtualScheduler
from .cloud import PinCloud
from .config import NodeSpec, PlatformConfig
from .orchestrator import DeviceDirectoryEntry, Orchestrator
from .physics import LensBenchState, RodRigState
from .protocol import LocalChannel
from .signaling import SignalingBroker
from .trace import Trace


def build_node_state(kind: str, physics: dict):
    if kind == "FL":
        return LensBenchState(**physics)
    return RodRigState(**physics)


class Platform:
    def __init__(self, config: PlatformConfig, scheduler: Scheduler | None = None):
        config.validate()
        self.config = config
        self.scheduler = scheduler or VirtualScheduler()
        self.virtual = isinstance(self.scheduler, VirtualScheduler)
        self.trace = Trace()
        self.trace.bind_clock(self.scheduler)
        tokens = [
            agent.cloud_token
            for exp in config.experiments
            for node in exp.nodes
            for agent in node.agents
        ]
        journal = None
        if config.data_dir:
            journal = f"{config.data_dir}/cloud-journal.ndjson"
        self.cloud = PinCloud(
            self.scheduler,
            tokens=tokens,
            heartbeat_ttl_ms=config.heartbeat_ttl_s * 1000.0,
            journal_path=journal,
        )
        self.broker = SignalingBroker(
            self.scheduler, camera_profiles=config.camera_profiles_ms, trace=self.trace
        )
        self.orchestrator = Orchestrator(
            self.scheduler,
            self.cloud,
            session_duration_s=config.session_duration_s,
            trace=self.trace,
            data_dir=config.data_dir,
        )
        self.sims: dict[str, NodeSim] = {}
        self.agents: dict[str, DeviceAgent] = {}

        for exp in config.experiments:
            self.orchestrator.add_experiment(exp.experiment_id, exp.kind)
            for node in exp.nodes:
                self._build_node(exp.experiment_id, exp.kind, node)
        for user in config.users:
            self.orchestrator.add_user(user.username, user.secret)
        self.orchestrator.add_user(config.tester.username, config.tester.secret)

    def _build_node(self, experiment_id: str, kind: str, node: NodeSpec) -> None:
        sim = NodeSim(
            kind,
            build_node_state(kind, node.physics),
            FaultConfig(**node.faults),
        )
        self.sims[node.node_id] = sim
        directory = [
            DeviceDirectoryEntry(
                device_id=a.device_id,
                experiment_id=experiment_id,
                node_id=node.node_id,
                credentials=a.credentials,
                role=a.role,
                cloud_token=a.cloud_token,
            )
            for a in node.agents
        ]
        self.orchestrator.add_node(
            experiment_id,
            node.node_id,
            control_device_id=node.control_agent.device_id,
            cloud_token=node.control_agent.cloud_token,
            devices=directory,
        )
        for spec in node.agents:
            agent = DeviceAgent(
                AgentConfig(
                    device_id=spec.device_id,
                    experiment_id=experiment_id,
                    node_id=node.node_id,
                    credentials=spec.credentials,
                    cloud_token=spec.cloud_token,
                    cameras=[CameraConfig(c.camera_id, c.view, c.profile) for c in spec.cameras],
                    role=spec.role,
                    session_duration_s=self.config.session_duration_s,
                    rng_seed=self.config.rng_seed,
                ),
                sim,
                self.scheduler,
                self.cloud,
                self.broker,
                trace=self.trace,
            )
            self.agents[spec.device_id] = agent

    # -- lifecycle ------------------------------------------------------------

    def connect_agent(self, device_id: str) -> None:
        agent = self.agents[device_id]
        device_end, server_end = LocalChannel.pair(self.scheduler)
        self.orchestrator.accept_device_channel(server_end)
        agent.connect(device_end)

    def start(self, settle_ms: float = 50.0) -> None:
        """Connect every agent and let auth plus first heartbeats settle."""
        for device_id in self.agents:
            self.connect_agent(device_id)
        self.run_for(settle_ms)

    def run_for(self, duration_ms: float) -> None:
        if self.virtual:
            self.scheduler.run_for(duration_ms)
        else:
            self.scheduler.sleep(duration_ms)

    def run_until_resolved(self, ticket, timeout_ms: float = 10_000.0) -> None:
        """Advance time until an entry ticket settles (virtual mode only)."""
        if self.virtual:
            step = 10.0
            waited = 0.0
            while ticket.state == "pending" and waited < timeout_ms:
                self.scheduler.run_for(step)
                waited += step
        else:
            ticket.resolved.wait(timeout_ms / 1000.0)

    def close(self) -> None:
        self.cloud.close()
        if hasattr(self.scheduler, "close"):
            self.scheduler.close()
