"""Starting point for a real-hardware endpoint.

Copy this file, fill in the four calls with your controller's API, and
hand an instance to `RobotBridge` — the QoS wiring (keep-last depth 1 on
control topics, continuous feedback) is already done by the bridge, so
nothing else changes when the hardware does.

Unit expectations at this boundary: `WireCommand` / `WireState` are
millimeters and degrees; `wire.to_wire` / `wire.from_wire_state` handle
the translation to the planner's meters/quaternions.
"""

from __future__ import annotations

from .bridge import EndpointError
from .wire import WireCommand, WireState


class HardwareEndpointTemplate:
    """Skeleton implementation of `BridgeEndpoint` for a real controller."""

    def __init__(self, address: str):
        self.address = address

    def connect(self) -> None:
        # Open your controller connection here (TCP, serial, vendor SDK...).
        # Raise EndpointError on failure so the bridge retries with backoff.
        raise EndpointError("HardwareEndpointTemplate is a stub; fill in connect()")

    def send_command(self, cmd: WireCommand) -> None:
        # Translate `cmd` into your controller's motion call.  The bridge
        # already guarantees `cmd` is the operator's freshest intent.
        raise NotImplementedError

    def send_gripper(self, closed: bool, seq: int) -> None:
        raise NotImplementedError

    def read_state(self) -> WireState:
        # Return the current end-effector pose in mm/degrees plus gripper
        # state.  Called continuously at the configured feedback rate.
        raise NotImplementedError

    def close(self) -> None:
        pass
