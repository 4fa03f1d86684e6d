"""
Phone-frame deltas to safe robot targets
========================================

The geometry layer in isolation: shortest-path angle wrapping, axis
mapping from the phone frame to the robot base frame, and the workspace
clamp, with printed numbers at each step.
"""

import math

from teleopkit.planner import WorkspaceBounds, clamp_workspace
from teleopkit.posemath import AxisMap, Rpy, Vec3, map_phone_delta, rotation_delta, wrap_angle

# Crossing the +/-180 degree seam: the raw difference is -358 degrees,
# the wrapped difference is the short way around, +2 degrees.
a = math.radians(179.0)
b = math.radians(-179.0)
print(f"raw difference:     {math.degrees(b - a):+9.3f} deg")
print(f"wrapped difference: {math.degrees(wrap_angle(b - a)):+9.3f} deg")

# The same wrap applied per component to an orientation delta, so a
# composed rotation never takes the long way around.
ref = Rpy(0.0, 0.0, math.radians(170.0))
cur = Rpy(0.0, 0.0, math.radians(-170.0))
d = rotation_delta(ref, cur)
print(f"yaw delta through the seam: {math.degrees(d.yaw):+6.1f} deg")

# An axis map re-expresses a phone displacement in the robot base frame.
# Here the phone is held sideways: robot x takes the negated phone z,
# robot y the negated phone x, robot z the phone y, all at half gain.
amap = AxisMap.from_spec("x=-z, y=-x, z=y", scale=0.5)
home = Vec3(0.40, 0.00, 0.30)
phone_step = Vec3(0.10, 0.04, -0.02)  # meters of phone motion
target = map_phone_delta(phone_step, amap, home)
print(f"phone step  {phone_step}")
print(f"maps to     {target}")

# The workspace clamp pins a target to the nearest face of the safe
# volume, componentwise, and is idempotent.
bounds = WorkspaceBounds(x=(0.15, 0.65), y=(-0.40, 0.40), z=(0.05, 0.60))
wild = Vec3(0.90, -0.10, -0.20)
safe = clamp_workspace(wild, bounds)
print(f"wild target {wild}")
print(f"clamped to  {safe}")
assert clamp_workspace(safe, bounds) == safe
