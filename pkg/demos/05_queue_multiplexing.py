"""Hardware multiplexing and the FIFO queue, narrated.

Three focal-length nodes, five students. The first three each get their own
node; the rest wait in line with visible token numbers that shift as people
leave.
"""

from remotelab.config import default_config
from remotelab.platform import Platform

platform = Platform(default_config(fl_nodes=3, users=5, session_duration_s=600.0))
platform.start()
orch = platform.orchestrator


def show(label: str) -> None:
    sessions = {s.user_id: s.node_id for s in orch.active_sessions()}
    queue = orch.queue_snapshot("focal-length")
    print(f"{label:<28} sessions={sessions} queue={queue}")


tokens = {}
for i in range(1, 6):
    user = f"user-{i}"
    tokens[user] = orch.login(user, f"pw-{i}")
    platform.broker.register(f"peer-{user}")
    ticket = orch.enter_experiment(tokens[user], "focal-length", f"peer-{user}")
    platform.run_until_resolved(ticket)
    state = ticket.state + (f" on {ticket.node_id}" if ticket.node_id else
                            f" (token {ticket.queue_position})" if ticket.queue_position else "")
    print(f"{user} enters -> {state}")

show("\nafter five arrivals:")

print("\nuser-2 leaves; the queue head takes the freed node:")
orch.leave_experiment(tokens["user-2"], "focal-length")
platform.run_for(200)
show("after user-2 left:")

print("\nuser-5's token dropped from 2 to 1:")
print(" ", orch.queue_status(tokens["user-5"], "focal-length"))

print("\nuser-4 (now in session) leaves; user-5 is granted:")
orch.leave_experiment(tokens["user-4"], "focal-length")
platform.run_for(200)
show("after user-4 left:")
