"""Spin up the real HTTP stack on localhost and drive it like a browser would.

Starts the cloud, signaling, and orchestrator services on ephemeral ports,
connects the device agents over real WebSockets, then performs a full user
flow with plain HTTP requests and a streaming WebSocket.
"""

import json
import threading
import time
import urllib.request

from remotelab.clock import RealTimeScheduler
from remotelab.config import default_config
from remotelab.net import ws as wslib
from remotelab.net.http import CloudServer, OrchestratorServer, SignalingServer
from remotelab.physics import decode_pgm, parse_pgm_metadata
from remotelab.platform import Platform


def http(method: str, url: str, body=None, token=None):
    data = json.dumps(body).encode() if body is not None else None
    request = urllib.request.Request(url, data=data, method=method)
    if data:
        request.add_header("Content-Type", "application/json")
    if token:
        request.add_header("Authorization", f"Bearer {token}")
    with urllib.request.urlopen(request, timeout=10) as response:
        return json.loads(response.read().decode())


config = default_config(fl_nodes=1, vr_nodes=0, users=2)
config.camera_profiles_ms = {"pi3b": 50.0, "pizero2w": 60.0, "ipcam": 80.0}
for name in ("orchestrator_bind", "cloud_bind", "signaling_bind"):
    setattr(config, name, "127.0.0.1:0")

platform = Platform(config, scheduler=RealTimeScheduler())
servers = {
    "cloud": CloudServer(config.cloud_bind, platform),
    "signaling": SignalingServer(config.signaling_bind, platform),
    "orchestrator": OrchestratorServer(config.orchestrator_bind, platform),
}
for role, server in servers.items():
    server.start_in_thread()
    print(f"{role} listening on http://{server.bound_address}")

for device_id in platform.agents:
    platform.connect_agent(device_id)
time.sleep(0.5)
print("agents:", {d: a.phase for d, a in platform.agents.items()})

orch = f"http://{servers['orchestrator'].bound_address}"
signaling = f"http://{servers['signaling'].bound_address}"

token = http("POST", f"{orch}/api/login", {"username": "user-1", "secret": "pw-1"})["token"]
print("logged in; catalog:", http("GET", f"{orch}/api/experiments", token=token)["experiments"])

http("POST", f"{signaling}/peer/register", {"peer_id": "demo-viewer"})
host, port = servers["signaling"].bound_address.rsplit(":", 1)
stream = wslib.connect(host, int(port), "/peer/stream?peer_id=demo-viewer")
frames = []
threading.Thread(
    target=lambda: [frames.append(m) for m in iter(stream.recv_message, None)],
    daemon=True,
).start()

entered = http(
    "POST", f"{orch}/api/experiments/focal-length/enter", {"peer_id": "demo-viewer"},
    token=token,
)
print("enter ->", entered)

http("POST", f"{orch}/api/experiments/focal-length/input",
     {"target": "screen", "steps": 500}, token=token)
time.sleep(1.0)
print("output pins:", http("GET", f"{orch}/api/experiments/focal-length/output", token=token))

time.sleep(1.0)
print(f"received {len(frames)} stream messages; first frame:")
_, payload = frames[0]
print("  shape:", decode_pgm(payload).shape, "metadata:", parse_pgm_metadata(payload))

print("leave ->", http("POST", f"{orch}/api/experiments/focal-length/leave", token=token))
stream.close()
for server in servers.values():
    server.shutdown()
platform.close()
print("stack stopped")
