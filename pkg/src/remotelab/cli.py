"""Command-line entry points: serve, agents, test, scenario, report.

Exit codes: 0 success, 1 assertion or check failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import time
from pathlib import Path

from .clock import RealTimeScheduler, VirtualScheduler
from .config import ConfigError, PlatformConfig, default_config
from .platform import Platform
from .scenario import ScenarioError, run_scenario_file
from .tester import (
    NotificationSink,
    VirtualUser,
    aggregate_ledger,
    append_ledger,
    load_ledger,
    uptime_summary,
)

ENV_BINDS = {
    "REMOTELAB_ORCHESTRATOR_BIND": "orchestrator_bind",
    "REMOTELAB_CLOUD_BIND": "cloud_bind",
    "REMOTELAB_SIGNALING_BIND": "signaling_bind",
}

ALL_ROLES = ("cloud", "signaling", "orchestrator", "agents", "tester")


def _emit(event: str, **fields) -> None:
    print(json.dumps({"event": event, **fields}), flush=True)


def _load_config(path: str | None) -> PlatformConfig:
    if path is None:
        config = default_config()
    else:
        config = PlatformConfig.load(path)
    for env, attr in ENV_BINDS.items():
        if os.environ.get(env):
            setattr(config, attr, os.environ[env])
    config.validate()
    return config


# -- serve ------------------------------------------------------------------------


def cmd_serve(args) -> int:
    config = _load_config(args.config)
    roles = set(args.roles.split(",")) if args.roles else set(ALL_ROLES)
    unknown = roles - set(ALL_ROLES)
    if unknown:
        raise ConfigError(f"unknown roles: {sorted(unknown)}")

    platform = Platform(config, scheduler=RealTimeScheduler())
    servers = {}
    from .net.http import CloudServer, OrchestratorServer, SignalingServer

    role_classes = {
        "cloud": (CloudServer, config.cloud_bind),
        "signaling": (SignalingServer, config.signaling_bind),
        "orchestrator": (OrchestratorServer, config.orchestrator_bind),
    }
    for role, (cls, bind) in role_classes.items():
        if role in roles:
            try:
                server = cls(bind, platform)
            except OSError as exc:
                print(f"error: cannot bind {role} to {bind}: {exc}", file=sys.stderr)
                for started in servers.values():
                    started.shutdown()
                return 2
            server.start_in_thread()
            servers[role] = server
            _emit("listening", role=role, addr=server.bound_address)

    if "agents" in roles:
        for device_id in platform.agents:
            platform.connect_agent(device_id)
        deadline = time.monotonic() + 10.0
        while time.monotonic() < deadline:
            idle = [d for d, a in platform.agents.items() if a.phase == "idle"]
            if len(idle) == len(platform.agents):
                break
            time.sleep(0.05)
        for device_id, agent in platform.agents.items():
            _emit("agent", device=device_id, phase=agent.phase)

    user = None
    if "tester" in roles:
        sink = NotificationSink(config.tester.sink)
        user = VirtualUser(platform, sink)
        _emit("tester", interval_s=config.tester.interval_s)

    _emit("ready", roles=sorted(roles))
    stop = {"flag": False}

    def handle_signal(signum, frame):
        stop["flag"] = True

    signal.signal(signal.SIGINT, handle_signal)
    signal.signal(signal.SIGTERM, handle_signal)
    next_check = time.monotonic()
    while not stop["flag"]:
        if user is not None and time.monotonic() >= next_check:
            for exp in config.experiments:
                report = user.run_check(exp.experiment_id)
                append_ledger(config.tester.ledger_path, [report])
                _emit("check", experiment=exp.experiment_id, overall=report.overall)
            next_check = time.monotonic() + config.tester.interval_s
        time.sleep(0.2)
    for server in servers.values():
        server.shutdown()
    platform.close()
    _emit("stopped")
    return 0


# -- agents (split process, remote services) ----------------------------------------


def cmd_agents(args) -> int:
    from .agent import AgentConfig, CameraConfig, DeviceAgent, FaultConfig, NodeSim
    from .net import ws as wslib
    from .net.clients import BrokerHttpClient, CloudHttpClient
    from .net.http import WsChannel
    from .platform import build_node_state

    config = _load_config(args.config)
    orch_host, orch_port = config.orchestrator_bind.rsplit(":", 1)
    cloud_client = CloudHttpClient(f"http://{config.cloud_bind}")
    broker_client = BrokerHttpClient(f"http://{config.signaling_bind}")
    scheduler = RealTimeScheduler()

    agents = []
    for exp in config.experiments:
        for node in exp.nodes:
            sim = NodeSim(exp.kind, build_node_state(exp.kind, node.physics), FaultConfig(**node.faults))
            for spec in node.agents:
                agents.append(
                    DeviceAgent(
                        AgentConfig(
                            device_id=spec.device_id,
                            experiment_id=exp.experiment_id,
                            node_id=node.node_id,
                            credentials=spec.credentials,
                            cloud_token=spec.cloud_token,
                            cameras=[
                                CameraConfig(c.camera_id, c.view, c.profile)
                                for c in spec.cameras
                            ],
                            role=spec.role,
                            session_duration_s=config.session_duration_s,
                            rng_seed=config.rng_seed,
                        ),
                        sim,
                        scheduler,
                        cloud_client,
                        broker_client,
                    )
                )

    attempts = 0
    while attempts < args.max_attempts:
        attempts += 1
        try:
            channels = []
            for agent in agents:
                ws = wslib.connect(orch_host, int(orch_port), "/device/channel")
                channel = WsChannel(ws)
                pump = channel.pump_in_thread()
                agent.connect(channel)
                channels.append((agent, channel, pump))
            break
        except OSError as exc:
            _emit("retry", attempt=attempts, error=str(exc))
            time.sleep(args.backoff_s)
    else:
        _emit("gave-up", attempts=attempts)
        return 1

    deadline = time.monotonic() + 10.0
    while time.monotonic() < deadline:
        if all(a.phase == "idle" for a in agents):
            break
        time.sleep(0.05)
    for agent in agents:
        _emit("agent", device=agent.config.device_id, phase=agent.phase)
    if not all(a.phase == "idle" for a in agents):
        return 1
    _emit("ready", agents=len(agents))
    try:
        while any(not ch.closed for _, ch, _ in channels):
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    return 0


# -- test -------------------------------------------------------------------------


def cmd_test(args) -> int:
    config = _load_config(args.config)
    platform = Platform(config, scheduler=VirtualScheduler())
    platform.start()
    sink = NotificationSink(config.tester.sink)
    user = VirtualUser(platform, sink)
    mode = "smoke" if args.smoke else "full"
    reports = []
    for _ in range(args.rounds):
        for exp in config.experiments:
            report = user.run_check(exp.experiment_id, mode=mode)
            reports.append(report)
            _emit(
                "check",
                experiment=exp.experiment_id,
                overall=report.overall,
                reasons=report.reasons,
            )
        if args.rounds > 1:
            platform.run_for(args.interval_s * 1000.0)
    if args.ledger:
        append_ledger(args.ledger, reports)
        _emit("ledger", path=args.ledger, appended=len(reports))
    platform.close()
    return 0 if all(r.overall == "pass" for r in reports) else 1


# -- scenario ------------------------------------------------------------------------


def cmd_scenario(args) -> int:
    tokens = list(args.args)
    if tokens and tokens[0] == "run":
        tokens.pop(0)
    if len(tokens) != 1:
        print("usage: remotelab scenario [run] <script.json>", file=sys.stderr)
        return 2
    report = run_scenario_file(tokens[0])
    output = report.to_json()
    if args.out:
        Path(args.out).write_text(output + "\n")
    print(output)
    return 0 if report.passed else 1


# -- report --------------------------------------------------------------------------


def _month_of(day: str) -> str:
    return day[:7]


def cmd_report(args) -> int:
    path = Path(args.ledger)
    if not path.exists() or not path.read_text().strip():
        print("no data: ledger empty or missing")
        return 0
    reports = load_ledger(path)
    days = aggregate_ledger(reports)
    summary = uptime_summary(days)

    by_month: dict[tuple[str, str], dict] = {}
    for day in days:
        bucket = by_month.setdefault(
            (day.experiment_id, _month_of(day.date)),
            {"Online": 0, "Partial": 0, "Offline": 0, "no-data": 0},
        )
        bucket[day.status] += 1

    print(f"{'experiment':<18} {'month':<9} {'online':>7} {'partial':>8} {'offline':>8}")
    for (experiment_id, month), counts in sorted(by_month.items()):
        print(
            f"{experiment_id:<18} {month:<9} {counts['Online']:>7} "
            f"{counts['Partial']:>8} {counts['Offline']:>8}"
        )
    print()
    for experiment_id, stats in sorted(summary["experiments"].items()):
        print(
            f"{experiment_id:<18} total   {stats['Online']:>7} {stats['Partial']:>8} "
            f"{stats['Offline']:>8}   online {stats['online_fraction'] * 100:.1f} %"
        )
    print(f"\nfleet online fraction: {summary['fleet_online_fraction'] * 100:.1f} %")
    if args.json:
        months: dict[str, dict[str, dict]] = {}
        for (experiment_id, month), counts in sorted(by_month.items()):
            months.setdefault(experiment_id, {})[month] = {
                "Online": counts["Online"],
                "Partial": counts["Partial"],
                "Offline": counts["Offline"],
            }
        summary["months"] = months
        Path(args.json).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


# -- init-config ----------------------------------------------------------------------


def cmd_init_config(args) -> int:
    config = default_config(fl_nodes=args.fl_nodes, vr_nodes=args.vr_nodes)
    text = config.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
        _emit("written", path=args.out)
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="remotelab",
        description="Remote-laboratory platform with simulated experiment hardware",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run services (and optionally agents/tester)")
    p.add_argument("--config", help="platform config JSON")
    p.add_argument("--roles", help=f"comma list of {','.join(ALL_ROLES)} (default all)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("agents", help="run the agent fleet against remote services")
    p.add_argument("--config", help="platform config JSON")
    p.add_argument("--max-attempts", type=int, default=10)
    p.add_argument("--backoff-s", type=float, default=1.0)
    p.set_defaults(func=cmd_agents)

    p = sub.add_parser("test", help="run automated checks in virtual time")
    p.add_argument("--config", help="platform config JSON")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--interval-s", type=float, default=8 * 3600.0)
    p.add_argument("--smoke", action="store_true", help="liveness-only checks")
    p.add_argument("--ledger", help="append reports to this ndjson ledger")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("scenario", help="run a scenario script")
    p.add_argument("args", nargs="+", help="[run] script.json")
    p.add_argument("--out", help="write the scenario report here")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("report", help="print availability tables from a ledger")
    p.add_argument("--ledger", required=True)
    p.add_argument("--json", help="also write the summary JSON here")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("init-config", help="emit a ready-to-edit default config")
    p.add_argument("--out")
    p.add_argument("--fl-nodes", type=int, default=1)
    p.add_argument("--vr-nodes", type=int, default=1)
    p.set_defaults(func=cmd_init_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
