"""Core data types and frame conventions.

Frame conventions:
    - World frame: x = magnetic east, y = magnetic north, z = up.
    - Heading psi: planar direction, radians, counter-clockwise from +x,
      wrapped to [0, 2*pi). A calibrated flat magnetometer reads
      (cos psi, sin psi, const), so psi = atan2(m_y, m_x).
    - Device frame: x forward, y left, z up when worn level.
    - Attitude quaternions are scalar-first (w, x, y, z) and map device
      frame to world frame.

Units: seconds, meters, m/s^2, rad/s; magnetometer channels are in
arbitrary linear units (uT-like). Internal angles are radians; file and
CLI surfaces use degrees.

All values here are immutable after construction and safe to share
across threads.
"""

from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.80665  # m/s^2

_CHANNELS = ("acc", "gyro", "mag")


@dataclass(frozen=True)
class ImuSample:
    """One timestamped 9-axis reading in the device frame."""

    t: float
    acc: np.ndarray   # (3,) m/s^2
    gyro: np.ndarray  # (3,) rad/s
    mag: np.ndarray   # (3,) arbitrary linear units

    def __post_init__(self):
        if not np.isfinite(self.t) or self.t < 0:
            raise ValueError("timestamp must be finite and non-negative")
        for name in _CHANNELS:
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"non-finite {name} component")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class DeviceTrace:
    """A uniformly sampled 9-axis trace for one device.

    Channel data is stored column-major as (n,) time and (n, 3) arrays;
    `samples` materializes ImuSample views on demand. `ref_heading` is
    an optional per-sample reference heading (radians, wrapped), present
    on phone traces.
    """

    device_id: str
    rate_hz: float
    t: np.ndarray
    acc: np.ndarray
    gyro: np.ndarray
    mag: np.ndarray
    ref_heading: np.ndarray | None = None

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("empty trace")
        if not np.all(np.isfinite(t)) or t[0] < 0:
            raise ValueError("timestamps must be finite and non-negative")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        for name in _CHANNELS:
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (t.size, 3):
                raise ValueError(f"{name} must have shape (n, 3)")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"non-finite value in {name}")
            object.__setattr__(self, name, v)
        if self.ref_heading is not None:
            r = np.asarray(self.ref_heading, dtype=float)
            if r.shape != t.shape or not np.all(np.isfinite(r)):
                raise ValueError("ref_heading must match timestamps")
            object.__setattr__(self, "ref_heading", r)

    def __len__(self):
        return self.t.size

    @property
    def dt(self):
        return 1.0 / self.rate_hz

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0])

    def is_uniform(self, tol=1e-6):
        if len(self) < 2:
            return True
        dt = np.diff(self.t)
        return float(np.max(dt) - np.min(dt)) <= tol

    @property
    def samples(self):
        return [ImuSample(float(self.t[i]), self.acc[i], self.gyro[i],
                          self.mag[i]) for i in range(len(self))]

    def replace(self, **kwargs):
        fields = dict(device_id=self.device_id, rate_hz=self.rate_hz,
                      t=self.t, acc=self.acc, gyro=self.gyro, mag=self.mag,
                      ref_heading=self.ref_heading)
        fields.update(kwargs)
        return DeviceTrace(**fields)


@dataclass(frozen=True)
class Position2D:
    """Planar position, meters east (x) / north (y)."""

    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("non-finite position")

    def norm(self):
        return float(np.hypot(self.x, self.y))


# --- quaternion attitude helpers (scalar-first, device -> world) ---

def quat_identity():
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_multiply(p, q):
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ])


def quat_normalize(q):
    n = np.linalg.norm(q)
    if n == 0:
        raise ValueError("zero quaternion")
    return q / n


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0 or angle == 0:
        return quat_identity()
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / n))


def quat_from_rotvec(rv):
    """Exponential map: rotation vector (rad) to unit quaternion."""
    rv = np.asarray(rv, dtype=float)
    angle = np.linalg.norm(rv)
    if angle < 1e-300:
        return quat_identity()
    return quat_from_axis_angle(rv / angle, angle)


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_yaw(q):
    """Planar yaw (rotation about world z) of a device->world attitude."""
    m = quat_to_matrix(q)
    return float(np.arctan2(m[1, 0], m[0, 0]))


def quat_from_euler_zyx(yaw, pitch, roll):
    """Compose Rz(yaw) @ Ry(pitch) @ Rx(roll) as a quaternion."""
    qz = quat_from_axis_angle([0, 0, 1], yaw)
    qy = quat_from_axis_angle([0, 1, 0], pitch)
    qx = quat_from_axis_angle([1, 0, 0], roll)
    return quat_multiply(quat_multiply(qz, qy), qx)


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
