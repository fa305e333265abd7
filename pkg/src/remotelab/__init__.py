"""Remote-laboratory platform with simulated experiment hardware.

A backend orchestrator with FIFO queueing and node multiplexing, a pin-store
interoperability cloud, a peer signaling broker with simulated media
transport, physics-simulating device agents, and an automated vision-based
testing subsystem with availability ledgers.
"""

__version__ = "0.1.0"
