"""Pure geometry kernel for the teleoperation pipeline.

Conventions, fixed once here and relied on everywhere else:

* Quaternions are Hamilton ``(w, x, y, z)``, unit norm, canonical sign
  (``w >= 0``; if ``w == 0`` the first nonzero of x, y, z is positive)
  so that equality tests are well defined under the double cover.
* Euler angles are extrinsic X-Y-Z fixed-axis roll/pitch/yaw in radians,
  i.e. the rotation matrix is ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
* Wrapped angles live in the half-open interval ``[-pi, pi)``; an input
  of exactly ``pi`` maps to ``-pi``.

All functions are pure and operate on small frozen value types; they are
safe to call from any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# Pitch this close to +/-pi/2 is treated as gimbal lock.
GIMBAL_LOCK_TOLERANCE = 1e-6


def wrap_angle(delta: float) -> float:
    """Map an angle to the half-open interval [-pi, pi).

    Shortest-path wrapping: the result is congruent to ``delta`` mod 2*pi,
    so an angular difference computed near the +/-180 degree seam comes out
    as the small physical rotation instead of a ~360 degree jump.
    """
    if not math.isfinite(delta):
        raise ValueError(f"wrap_angle: non-finite input {delta!r}")
    wrapped = (delta + math.pi) % TWO_PI - math.pi
    # Float rounding in the modulo can land exactly on +pi; keep the
    # interval half-open.
    if wrapped >= math.pi:
        wrapped -= TWO_PI
    return wrapped


@dataclass(frozen=True)
class Vec3:
    """Cartesian triple in meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            raise ValueError(f"Vec3 components must be finite: {self}")
        # numpy scalars sneak in through matrix math; normalize so repr,
        # json and the wire grammar always see builtin floats
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "z", float(self.z))

    @classmethod
    def zero(cls) -> "Vec3":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, a) -> "Vec3":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def distance_to(self, other: "Vec3") -> float:
        # hypot instead of squaring: finite-but-huge components (which pass
        # every isfinite gate) must come back as a large distance, not an
        # OverflowError out of the safety filter.
        try:
            return math.hypot(self.x - other.x, self.y - other.y, self.z - other.z)
        except OverflowError:
            return math.inf


@dataclass(frozen=True)
class Quat:
    """Unit quaternion (w, x, y, z) with canonical sign.

    The constructor normalizes and canonicalizes, so any Quat in the
    system satisfies ``|norm - 1| < 1e-9`` and ``w >= 0``.
    """

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        comps = (self.w, self.x, self.y, self.z)
        if not all(math.isfinite(c) for c in comps):
            raise ValueError(f"Quat components must be finite: {comps}")
        norm = math.sqrt(sum(c * c for c in comps))
        if not math.isfinite(norm):
            raise ValueError("Quat norm overflows, cannot normalize")
        if norm < 1e-12:
            raise ValueError("Quat norm too small to normalize")
        w, x, y, z = (c / norm for c in comps)
        if abs(w) < 1e-12:
            # Exactly-180-degree rotations land here with float fuzz in w;
            # snap it so the sign convention below is deterministic.
            w = 0.0
            renorm = math.sqrt(x * x + y * y + z * z)
            x, y, z = x / renorm, y / renorm, z / renorm
        if w < 0.0 or (w == 0.0 and _first_nonzero_negative(x, y, z)):
            w, x, y, z = -w, -x, -y, -z
        object.__setattr__(self, "w", float(w))
        object.__setattr__(self, "x", float(x))
        object.__setattr__(self, "y", float(y))
        object.__setattr__(self, "z", float(z))

    @classmethod
    def identity(cls) -> "Quat":
        return cls(1.0, 0.0, 0.0, 0.0)

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def approx_equal(self, other: "Quat", tol: float = 1e-9) -> bool:
        """Geodesic closeness of two quaternions (double-cover aware)."""
        a = (self.w, self.x, self.y, self.z)
        b = (other.w, other.x, other.y, other.z)
        if sum(u * v for u, v in zip(a, b)) < 0.0:
            b = tuple(-v for v in b)
        diff = math.sqrt(sum((u - v) ** 2 for u, v in zip(a, b)))
        total = math.sqrt(sum((u + v) ** 2 for u, v in zip(a, b)))
        # atan2 form stays well conditioned at tiny angles; acos(dot) does not
        return 2.0 * math.atan2(diff, total) <= tol


def _first_nonzero_negative(*components: float) -> bool:
    for c in components:
        if c != 0.0:
            return c < 0.0
    return False


@dataclass(frozen=True)
class Rpy:
    """Roll/pitch/yaw in radians, each wrapped to [-pi, pi).

    ``gimbal_lock`` marks values produced by a quaternion conversion at
    |pitch| ~ pi/2, where the roll/yaw split is degenerate (see
    `quat_to_rpy`); it does not participate in equality.
    """

    roll: float
    pitch: float
    yaw: float
    gimbal_lock: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.roll, self.pitch, self.yaw)):
            raise ValueError(f"Rpy components must be finite: {self}")
        object.__setattr__(self, "roll", float(self.roll))
        object.__setattr__(self, "pitch", float(self.pitch))
        object.__setattr__(self, "yaw", float(self.yaw))

    @classmethod
    def zero(cls) -> "Rpy":
        return cls(0.0, 0.0, 0.0)

    def wrapped(self) -> "Rpy":
        return Rpy(
            wrap_angle(self.roll),
            wrap_angle(self.pitch),
            wrap_angle(self.yaw),
            gimbal_lock=self.gimbal_lock,
        )

    def to_array(self) -> np.ndarray:
        return np.array([self.roll, self.pitch, self.yaw], dtype=np.float64)


def quat_to_rpy(q: Quat) -> Rpy:
    """Convert a unit quaternion to extrinsic X-Y-Z roll/pitch/yaw.

    At |pitch| within ~1e-6 of pi/2 the decomposition is singular; the
    full twist is assigned to roll, yaw is fixed to 0 and the result is
    flagged with ``gimbal_lock=True``.
    """
    sinp = 2.0 * (q.w * q.y - q.z * q.x)
    if abs(sinp) >= 1.0 - GIMBAL_LOCK_TOLERANCE:
        pitch = math.copysign(math.pi / 2.0, sinp)
        roll = wrap_angle(2.0 * math.atan2(q.x, q.w))
        return Rpy(roll, pitch, 0.0, gimbal_lock=True)

    roll = math.atan2(2.0 * (q.w * q.x + q.y * q.z), 1.0 - 2.0 * (q.x**2 + q.y**2))
    pitch = math.asin(sinp)
    yaw = math.atan2(2.0 * (q.w * q.z + q.x * q.y), 1.0 - 2.0 * (q.y**2 + q.z**2))
    return Rpy(wrap_angle(roll), pitch, wrap_angle(yaw))


def rpy_to_quat(r: Rpy) -> Quat:
    """Convert roll/pitch/yaw (extrinsic X-Y-Z) to a canonical quaternion."""
    cr, sr = math.cos(r.roll / 2.0), math.sin(r.roll / 2.0)
    cp, sp = math.cos(r.pitch / 2.0), math.sin(r.pitch / 2.0)
    cy, sy = math.cos(r.yaw / 2.0), math.sin(r.yaw / 2.0)
    return Quat(
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    )


@dataclass(frozen=True, eq=False)
class AxisMap:
    """Static axis-alignment matrix plus translation scale.

    ``m`` re-expresses a phone-frame displacement in the robot base frame
    (for presets it is a pure signed axis permutation); ``scale`` is the
    dimensionless gain applied to the displacement before mapping.
    """

    m: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"AxisMap matrix must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("AxisMap matrix must be finite")
        if abs(np.linalg.det(m)) < 1e-12:
            raise ValueError("AxisMap matrix must have full rank")
        if not (math.isfinite(self.scale) and self.scale > 0.0):
            raise ValueError(f"AxisMap scale must be positive, got {self.scale}")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    def __eq__(self, other: object) -> bool:
        # dataclass-generated eq would compare the matrix elementwise and
        # hand back an array; give value semantics instead
        if not isinstance(other, AxisMap):
            return NotImplemented
        return self.scale == other.scale and np.array_equal(self.m, other.m)

    def __hash__(self) -> int:
        return hash((self.m.tobytes(), self.scale))

    @classmethod
    def identity(cls, scale: float = 1.0) -> "AxisMap":
        return cls(np.eye(3), scale)

    @classmethod
    def from_spec(cls, spec: str, scale: float = 1.0) -> "AxisMap":
        """Build a signed axis permutation from a compact string.

        ``spec`` assigns each robot axis a phone axis, e.g.
        ``"x=-z, y=-x, z=y"`` reads "robot x takes the negated phone z",
        and so on.  Every robot axis must be assigned exactly once and
        every phone axis used exactly once, which guarantees the preset
        invariant (one entry of magnitude 1 per row and column).
        """
        index = {"x": 0, "y": 1, "z": 2}
        m = np.zeros((3, 3))
        seen_rows: set[int] = set()
        seen_cols: set[int] = set()
        for part in spec.split(","):
            part = part.strip().lower()
            if not part:
                continue
            try:
                robot_axis, phone_axis = (s.strip() for s in part.split("="))
            except ValueError:
                raise ValueError(f"bad axis-map term {part!r}") from None
            sign = 1.0
            if phone_axis.startswith(("-", "+")):
                sign = -1.0 if phone_axis[0] == "-" else 1.0
                phone_axis = phone_axis[1:].strip()
            if robot_axis not in index or phone_axis not in index:
                raise ValueError(f"bad axis-map term {part!r}")
            row, col = index[robot_axis], index[phone_axis]
            if row in seen_rows or col in seen_cols:
                raise ValueError(f"axis {part!r} assigned twice in {spec!r}")
            seen_rows.add(row)
            seen_cols.add(col)
            m[row, col] = sign
        if len(seen_rows) != 3:
            raise ValueError(f"axis-map spec must assign all three axes: {spec!r}")
        return cls(m, scale)

    def to_spec(self) -> str:
        names = "xyz"
        terms = []
        for row in range(3):
            col = int(np.argmax(np.abs(self.m[row])))
            sign = "-" if self.m[row, col] < 0 else ""
            terms.append(f"{names[row]}={sign}{names[col]}")
        return ",".join(terms)


def map_phone_delta(dp: Vec3, axis_map: AxisMap, r_initial: Vec3) -> Vec3:
    """Map a phone-frame displacement onto an absolute robot position.

    target = r_initial + M @ (dp * scale)
    """
    mapped = axis_map.m @ (dp.to_array() * axis_map.scale)
    return Vec3(r_initial.x + mapped[0], r_initial.y + mapped[1], r_initial.z + mapped[2])


def rotation_delta(reference: Rpy, current: Rpy) -> Rpy:
    """Per-component wrapped difference current - reference."""
    return Rpy(
        wrap_angle(current.roll - reference.roll),
        wrap_angle(current.pitch - reference.pitch),
        wrap_angle(current.yaw - reference.yaw),
    )


def compose_rpy(base: Rpy, delta: Rpy) -> Rpy:
    """Add an RPY delta to a base orientation, wrapping each component."""
    return Rpy(
        wrap_angle(base.roll + delta.roll),
        wrap_angle(base.pitch + delta.pitch),
        wrap_angle(base.yaw + delta.yaw),
    )
