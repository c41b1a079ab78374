"""Planar heading estimation.

Four methods share the HeadingSeries output type:
    - mag: tilt-compensated magnetic heading, psi = atan2(m_y, m_x) after
      rotating the magnetometer into the flat plane and adding the
      rolling-window calibration offset.
    - gyro: quaternion strapdown integration of the gyroscope, planar yaw
      plus the gyro-vs-magnetometer heading offset.
    - complementary: time-scheduled blend of the two, gyro weight
      alpha0 - t * slope clamped to [0, 1]. The blend is linear along the
      shortest arc so it matches the scalar schedule exactly while
      honoring the 0/360 boundary.
    - madgwick: gradient-descent orientation filter baseline.
"""

from dataclasses import dataclass

import numpy as np

from .angles import circular_diff, wrap_angle
from .datamodel import (GRAVITY, quat_from_euler_zyx, quat_from_rotvec,
                        quat_multiply, quat_normalize, quat_yaw, rot_x, rot_y)


@dataclass(frozen=True)
class HeadingSeries:
    """Per-timestamp planar heading estimates (radians, wrapped)."""

    t: np.ndarray
    psi: np.ndarray
    method: str
    tilt: np.ndarray | None = None  # (n, 2) (phi, theta) when computed

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        psi = wrap_angle(np.asarray(self.psi, dtype=float))
        if t.shape != psi.shape:
            raise ValueError("t and psi must have the same shape")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "psi", psi)

    def __len__(self):
        return self.t.size


def _check_aligned(a, b):
    if len(a) != len(b) or not np.allclose(a.t, b.t, atol=1e-9):
        raise ValueError("series are not on the same time grid")


def tilt_angles(a, gravity=GRAVITY):
    """Roll and pitch (phi, theta) of a near-static accelerometer vector.

    phi = atan2(a_y, a_z); theta = arctan(-a_x / (a_y sin phi + a_z cos phi)).
    Raises ValueError in free-fall (vanishing norm).
    """
    a = np.asarray(a, dtype=float)
    norm = np.linalg.norm(a)
    if norm < 0.2 * gravity:
        raise ValueError("tilt unavailable: free-fall accelerometer reading")
    phi = np.arctan2(a[1], a[2])
    den = a[1] * np.sin(phi) + a[2] * np.cos(phi)
    theta = np.arctan2(-a[0], den)
    return float(phi), float(theta)


def rotate_to_flat(v, phi, theta):
    """Rotate a device-frame vector into the flat (theta = phi = 0) plane."""
    return rot_y(theta) @ rot_x(phi) @ np.asarray(v, dtype=float)


def mag_heading(m, tilt, mag_offset=0.0):
    """Tilt-compensated magnetic heading corrected by the current offset."""
    phi, theta = tilt
    flat = rotate_to_flat(m, phi, theta)
    horizontal = np.hypot(flat[0], flat[1])
    if horizontal < 1e-12 * max(np.linalg.norm(flat), 1e-300):
        raise ValueError("heading undefined: zero horizontal field")
    return wrap_angle(np.arctan2(flat[1], flat[0]) + mag_offset)


def mag_heading_series(trace, tilts, mag_offset=0.0):
    """Vectorized tilt-compensated magnetic heading for a whole trace.

    tilts is an (n, 2) array of per-sample (phi, theta); mag_offset is a
    scalar or per-sample array added after tilt compensation.
    """
    tilts = np.asarray(tilts, dtype=float)
    phi, theta = tilts[:, 0], tilts[:, 1]
    mx, my, mz = trace.mag[:, 0], trace.mag[:, 1], trace.mag[:, 2]
    sphi, cphi = np.sin(phi), np.cos(phi)
    sth, cth = np.sin(theta), np.cos(theta)
    # rows of Ry(theta) @ Rx(phi)
    fx = cth * mx + sth * sphi * my + sth * cphi * mz
    fy = cphi * my - sphi * mz
    if np.any(np.hypot(fx, fy) < 1e-12):
        raise ValueError("heading undefined: zero horizontal field")
    psi = wrap_angle(np.arctan2(fy, fx) + np.asarray(mag_offset, dtype=float))
    return HeadingSeries(t=trace.t, psi=psi, method="mag", tilt=tilts)


def integrate_attitude(t, gyro, q0):
    """Strapdown quaternion integration, one exponential update per step.

    Uses the trapezoidal average of consecutive body rates within each
    interval; the quaternion is renormalized after every update.
    """
    t = np.asarray(t, dtype=float)
    dt = np.diff(t)
    if dt.size and (np.max(dt) - np.min(dt)) > 1e-6:
        raise ValueError("non-uniform timestamps")
    quats = np.empty((t.size, 4))
    q = quat_normalize(np.asarray(q0, dtype=float))
    quats[0] = q
    for k in range(1, t.size):
        omega = 0.5 * (gyro[k - 1] + gyro[k])
        q = quat_multiply(q, quat_from_rotvec(omega * dt[k - 1]))
        q = quat_normalize(q)
        quats[k] = q
    return quats


def integrate_gyro(trace, initial_attitude=None, gyro_offset=0.0):
    """Gyro-only heading: planar yaw of the integrated attitude + offset."""
    q0 = (initial_attitude if initial_attitude is not None
          else np.array([1.0, 0.0, 0.0, 0.0]))
    quats = integrate_attitude(trace.t, trace.gyro, q0)
    yaw = np.array([quat_yaw(q) for q in quats])
    return HeadingSeries(t=trace.t, psi=wrap_angle(yaw + gyro_offset),
                         method="gyro")


def attitude_from_tilt(phi, theta):
    """Attitude with zero yaw and the given roll/pitch."""
    return quat_from_euler_zyx(0.0, theta, phi)


def complementary_heading(gyro_series, mag_series, alpha0=0.8,
                          alpha_slope=1.0 / 400.0, t0=None):
    """Scheduled complementary fusion of gyro and magnetic heading.

    Gyro weight w(t) = clamp(alpha0 - (t - t0) * alpha_slope, 0, 1); the
    output is the linear blend along the shortest arc from the magnetic
    to the gyroscopic heading.
    """
    _check_aligned(gyro_series, mag_series)
    t = gyro_series.t
    if t0 is None:
        t0 = t[0]
    w_gyro = np.clip(alpha0 - (t - t0) * alpha_slope, 0.0, 1.0)
    psi = wrap_angle(mag_series.psi
                     + w_gyro * circular_diff(gyro_series.psi, mag_series.psi))
    return HeadingSeries(t=t, psi=psi, method="complementary",
                         tilt=mag_series.tilt)


class MadgwickFilter:
    """Standard 9-axis gradient-descent orientation filter.

    Scalar-first quaternion, gravity reference (0, 0, 1), magnetic flux
    reference (b_x, 0, b_z) recomputed from the current estimate.
    """

    def __init__(self, sample_period, beta=0.1):
        self.sample_period = sample_period
        self.beta = beta
        self.q = np.array([1.0, 0.0, 0.0, 0.0])

    def update(self, gyro, acc, mag):
        q1, q2, q3, q4 = self.q
        gx, gy, gz = gyro

        a_norm = np.linalg.norm(acc)
        m_norm = np.linalg.norm(mag)
        if a_norm == 0 or m_norm == 0:
            self._integrate_rate_only(gyro)
            return
        ax, ay, az = acc / a_norm
        mx, my, mz = mag / m_norm

        # reference direction of earth's magnetic field
        _2q1mx = 2 * q1 * mx
        _2q1my = 2 * q1 * my
        _2q1mz = 2 * q1 * mz
        _2q2mx = 2 * q2 * mx
        hx = (mx * q1 * q1 - _2q1my * q4 + _2q1mz * q3 + mx * q2 * q2
              + 2 * q2 * my * q3 + 2 * q2 * mz * q4 - mx * q3 * q3
              - mx * q4 * q4)
        hy = (_2q1mx * q4 + my * q1 * q1 - _2q1mz * q2 + _2q2mx * q3
              - my * q2 * q2 + my * q3 * q3 + 2 * q3 * mz * q4
              - my * q4 * q4)
        _2bx = np.sqrt(hx * hx + hy * hy)
        _2bz = (-_2q1mx * q3 + _2q1my * q2 + mz * q1 * q1 + _2q2mx * q4
                - mz * q2 * q2 + 2 * q3 * my * q4 - mz * q3 * q3
                + mz * q4 * q4)
        _4bx = 2 * _2bx
        _4bz = 2 * _2bz

        # gradient of the combined gravity + flux objective
        s1 = (-2 * q3 * (2 * q2 * q4 - 2 * q1 * q3 - ax)
              + 2 * q2 * (2 * q1 * q2 + 2 * q3 * q4 - ay)
              - _2bz * q3 * (_2bx * (0.5 - q3 * q3 - q4 * q4)
                             + _2bz * (q2 * q4 - q1 * q3) - mx)
              + (-_2bx * q4 + _2bz * q2) * (_2bx * (q2 * q3 - q1 * q4)
                                            + _2bz * (q1 * q2 + q3 * q4) - my)
              + _2bx * q3 * (_2bx * (q1 * q3 + q2 * q4)
                             + _2bz * (0.5 - q2 * q2 - q3 * q3) - mz))
        s2 = (2 * q4 * (2 * q2 * q4 - 2 * q1 * q3 - ax)
              + 2 * q1 * (2 * q1 * q2 + 2 * q3 * q4 - ay)
              - 4 * q2 * (1 - 2 * q2 * q2 - 2 * q3 * q3 - az)
              + _2bz * q4 * (_2bx * (0.5 - q3 * q3 - q4 * q4)
                             + _2bz * (q2 * q4 - q1 * q3) - mx)
              + (_2bx * q3 + _2bz * q1) * (_2bx * (q2 * q3 - q1 * q4)
                                           + _2bz * (q1 * q2 + q3 * q4) - my)
              + (_2bx * q4 - _4bz * q2) * (_2bx * (q1 * q3 + q2 * q4)
                                           + _2bz * (0.5 - q2 * q2 - q3 * q3)
                                           - mz))
        s3 = (-2 * q1 * (2 * q2 * q4 - 2 * q1 * q3 - ax)
              + 2 * q4 * (2 * q1 * q2 + 2 * q3 * q4 - ay)
              - 4 * q3 * (1 - 2 * q2 * q2 - 2 * q3 * q3 - az)
              + (-_4bx * q3 - _2bz * q1) * (_2bx * (0.5 - q3 * q3 - q4 * q4)
                                            + _2bz * (q2 * q4 - q1 * q3) - mx)
              + (_2bx * q2 + _2bz * q4) * (_2bx * (q2 * q3 - q1 * q4)
                                           + _2bz * (q1 * q2 + q3 * q4) - my)
              + (_2bx * q1 - _4bz * q3) * (_2bx * (q1 * q3 + q2 * q4)
                                           + _2bz * (0.5 - q2 * q2 - q3 * q3)
                                           - mz))
        s4 = (2 * q2 * (2 * q2 * q4 - 2 * q1 * q3 - ax)
              + 2 * q3 * (2 * q1 * q2 + 2 * q3 * q4 - ay)
              + (-_4bx * q4 + _2bz * q2) * (_2bx * (0.5 - q3 * q3 - q4 * q4)
                                            + _2bz * (q2 * q4 - q1 * q3) - mx)
              + (-_2bx * q1 + _2bz * q3) * (_2bx * (q2 * q3 - q1 * q4)
                                            + _2bz * (q1 * q2 + q3 * q4) - my)
              + _2bx * q2 * (_2bx * (q1 * q3 + q2 * q4)
                             + _2bz * (0.5 - q2 * q2 - q3 * q3) - mz))
        s_norm = np.sqrt(s1 * s1 + s2 * s2 + s3 * s3 + s4 * s4)
        if s_norm > 0:
            s1, s2, s3, s4 = s1 / s_norm, s2 / s_norm, s3 / s_norm, s4 / s_norm

        q_dot1 = 0.5 * (-q2 * gx - q3 * gy - q4 * gz) - self.beta * s1
        q_dot2 = 0.5 * (q1 * gx + q3 * gz - q4 * gy) - self.beta * s2
        q_dot3 = 0.5 * (q1 * gy - q2 * gz + q4 * gx) - self.beta * s3
        q_dot4 = 0.5 * (q1 * gz + q2 * gy - q3 * gx) - self.beta * s4

        q = self.q + np.array([q_dot1, q_dot2, q_dot3, q_dot4]) \
            * self.sample_period
        self.q = q / np.linalg.norm(q)

    def _integrate_rate_only(self, gyro):
        q1, q2, q3, q4 = self.q
        gx, gy, gz = gyro
        q_dot = 0.5 * np.array([
            -q2 * gx - q3 * gy - q4 * gz,
            q1 * gx + q3 * gz - q4 * gy,
            q1 * gy - q2 * gz + q4 * gx,
            q1 * gz + q2 * gy - q3 * gx,
        ])
        q = self.q + q_dot * self.sample_period
        self.q = q / np.linalg.norm(q)


def madgwick_heading(trace, gain=0.1):
    """Madgwick-filter baseline heading for a 9-axis trace.

    Internally mirrors the y axis so the filter sees a right-handed
    scene matching this package's heading convention (psi = atan2 of the
    flat-plane magnetometer); heading is the negated planar yaw.
    """
    if not trace.is_uniform():
        raise ValueError("madgwick_heading requires a uniform trace")
    flt = MadgwickFilter(sample_period=trace.dt, beta=gain)
    reflect = np.array([1.0, -1.0, 1.0])
    greflect = np.array([-1.0, 1.0, -1.0])
    psi = np.empty(len(trace))
    for k in range(len(trace)):
        flt.update(trace.gyro[k] * greflect, trace.acc[k] * reflect,
                   trace.mag[k] * reflect)
        psi[k] = -quat_yaw(flt.q)
    return HeadingSeries(t=trace.t, psi=wrap_angle(psi), method="madgwick")
