"""
The TCP wire bridge: unit translation, freshness, degraded mode
===============================================================

A real controller speaks millimeters and Euler degrees over a plain
TCP socket, one ASCII line per command.  This starts the mock
controller on an ephemeral port, shows the line grammar, demonstrates
that a burst of stale targets collapses to a single fresh wire write,
then kills the controller mid-session to show degraded-mode reporting
and the reconnect that discards everything queued during the outage.
"""

import time

from teleopkit import topics
from teleopkit.bridge import RobotBridge, TcpEndpoint
from teleopkit.bus import MessageBus, QosProfile
from teleopkit.clock import VirtualClock
from teleopkit.messages import TargetPose
from teleopkit.posemath import Quat, Vec3
from teleopkit.wire import MockWireServer, format_movl, to_wire

clock = VirtualClock()
bus = MessageBus(clock)

# The grammar: meters and quaternions on the bus become millimeters
# and degrees on the line.
target = TargetPose(Vec3(0.42, -0.03, 0.31), Quat.identity(), stamp_ns=0)
print("wire line:", format_movl(to_wire(target, seq=7)).strip())

server = MockWireServer(port=0, clock=clock)
server.start()
print(f"mock controller listening on 127.0.0.1:{server.port}")

health = bus.subscribe(topics.BRIDGE_HEALTH, QosProfile(depth=8))
bridge = RobotBridge(bus, "", TcpEndpoint("127.0.0.1", server.port), clock)
bridge.connect()


def publish_target(x: float) -> None:
    clock.advance(0.005)
    bus.publish(
        topics.TARGET_POSE,
        TargetPose(Vec3(x, 0.0, 0.30), Quat.identity(), clock.now_ns()),
    )


# Freshness: five targets pile up while the consumer stalls.  The
# control subscription keeps only the last one, so a single drain puts
# exactly the newest intent on the wire.
for i in range(5):
    publish_target(0.40 + 0.01 * i)
bridge.drain_commands()
deadline = time.monotonic() + 5.0
while not server.movl_seqs and time.monotonic() < deadline:
    time.sleep(0.01)
print(f"burst of 5 -> wire saw sequence(s) {server.movl_seqs} (newest only)")

# Feedback comes back in native units and lands on the bus in meters;
# a quarter second of lag time shows the arm under way toward 0.44.
clock.advance(0.25)
state = bridge.publish_feedback()
print(f"feedback: x = {state.ee_position.x:.3f} m, "
      f"gripper {'closed' if state.gripper_closed else 'open'}")

# Degraded mode: kill the controller.  The next read fails, the bridge
# reports unhealthy and schedules a retry instead of crashing.
server.stop()
print("controller killed; next read returns:", bridge.publish_feedback())
report = [env.payload for env in health.drain()]
print(f"after failure: degraded={report[-1].degraded} ({report[-1].reason})")

# A target published during the outage must never reach a fresh
# connection; the operator's intent from before the reconnect is stale.
publish_target(0.99)

# Bring a controller back on the same port.  Once the retry backoff
# elapses the bridge reconnects and drops the queued target.
revived = MockWireServer(port=server.port, clock=clock)
revived.start()
clock.advance(0.1)
bridge.drain_commands()
report = [env.payload for env in health.drain()]
print(f"after recovery: degraded={report[-1].degraded} ({report[-1].reason})")
print(f"stale target reached the wire: {bool(revived.movl_seqs)}")

# Fresh intent after the reconnect flows normally again.
publish_target(0.50)
bridge.drain_commands()
deadline = time.monotonic() + 5.0
while not revived.movl_seqs and time.monotonic() < deadline:
    time.sleep(0.01)
print(f"fresh target after recovery -> wire sequence(s) {revived.movl_seqs}")
print(f"bridge stats: {bridge.stats}")

bridge.close()
revived.stop()
