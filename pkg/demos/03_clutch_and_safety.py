"""
Clutching, the zero-jump filter, and workspace enforcement
==========================================================

Drives the planner state machine directly: release the clutch to start
tracking, re-position the phone while engaged (the robot holds still),
release again to re-index, then inject a 10 m tracking glitch and watch
the filter drop it and recover on the next sane sample.
"""

from teleopkit.clock import VirtualClock
from teleopkit.messages import Button, ButtonEvent, PoseSample, RobotState
from teleopkit.planner import Planner, PlannerConfig, WorkspaceBounds
from teleopkit.posemath import AxisMap, Quat, Rpy, Vec3, rpy_to_quat

config = PlannerConfig(
    axis_map=AxisMap.identity(),
    workspace=WorkspaceBounds(x=(0.15, 0.65), y=(-0.40, 0.40), z=(0.05, 0.60)),
    jump_threshold=0.060,
)
clock = VirtualClock()
planner = Planner(config, clock)
stamp = 0.0


def send(x, y=0.0, z=0.0):
    global stamp
    stamp += 20.0
    return planner.process_pose(PoseSample(stamp, Vec3(x, y, z), Quat.identity()))


def feedback(x):
    planner.on_feedback(RobotState(
        ee_position=Vec3(x, 0.0, 0.30),
        ee_orientation=rpy_to_quat(Rpy.zero()),
        joints=(0.0,) * 6,
        gripper_closed=False,
        stamp_ns=clock.now_ns(),
    ))


# A release re-indexes on the newest robot feedback paired with the
# newest phone pose, so the planner needs one of each first.
feedback(0.40)
send(0.0)
planner.handle_button(ButtonEvent(Button.VOLUME_UP, stamp))
print(f"clutch after release: {planner.clutch.mode.value}")

# tracking: a 3 cm phone move becomes a 3 cm target move from home
t = send(0.03)
print(f"phone +3 cm -> target x = {t.position.x:.3f} m")

# Engage, walk the phone half a meter away, release. No output while
# engaged, and the release re-zeros on the spot, so the robot does not
# chase the repositioning move.
clock.advance(0.2)
planner.handle_button(ButtonEvent(Button.VOLUME_UP, stamp))
assert send(0.50) is None
print("engaged: half-meter phone move produced no target")
feedback(0.43)  # where the arm actually settled
clock.advance(0.2)
planner.handle_button(ButtonEvent(Button.VOLUME_UP, stamp))
t = send(0.50)  # same phone position as at the release
print(f"released at the new zero -> target x = {t.position.x:.3f} m (no jump)")

# A glitch: the next sample teleports 10 m. The filter drops it, and the
# following in-range sample is accepted again without any manual reset.
assert send(10.5) is None
t = send(0.501)
print(f"10 m glitch dropped (dropped_jumps={planner.stats.dropped_jumps}), "
      f"recovery target x = {t.position.x:.3f} m")

# Workspace enforcement: walking toward the wall in honest steps, the
# target tracks until the boundary and then pins to the face.
for phone_x in (0.551, 0.601, 0.651, 0.701, 0.751):
    t = send(phone_x)
print(f"walked past the wall -> target pinned at x = {t.position.x:.2f} m")
print(f"stats: {planner.stats}")
