"""Ground-truth walking-scenario generator.

Produces the 9-axis signals a head-worn device would record on a known
trajectory, with controllable noise, biases, and miscalibration, so
every pipeline stage can be tested against truth.

Signal model:
    - The walker follows a waypoint polyline at constant speed, with
      raised-cosine heading transitions of fixed duration at interior
      waypoints (so gyro rates are band-limited and analytic).
    - A stationary lead-in and outro bracket the walk.
    - Accelerometer: gravity plus a vertical sinusoid at step frequency
      while walking, rotated by the (fixed) mounting tilt.
    - Gyroscope: analytic heading rate about the device z axis (through
      the same tilt), plus a constant bias.
    - Magnetometer: unit horizontal field pointing along the true
      heading rotated by the hard-iron offset, plus a vertical
      component, through the same tilt.
"""

import math
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .angles import circular_diff, wrap_angle
from .calibration import AccelCalib
from .datamodel import GRAVITY, DeviceTrace, rot_x, rot_y
from .displacement import Track


@dataclass(frozen=True)
class SynthScenario:
    """Deterministic description of one synthetic walk."""

    waypoints: tuple  # ((x, y), ...) meters, >= 2 points
    speed: float = 1.39          # m/s
    step_freq: float = 1.8       # Hz
    step_amp: float = 3.0        # m/s^2
    height: float = 1.80         # m
    rate_hz: float = 20.0
    lead_in_s: float = 2.0
    outro_s: float = 1.0
    turn_duration_s: float = 1.0
    noise_acc: float = 0.0       # per-channel Gaussian sigma, m/s^2
    noise_gyro: float = 0.0      # rad/s
    noise_mag: float = 0.0       # field units
    accel_inject: AccelCalib | None = None
    gyro_bias: tuple = (0.0, 0.0, 0.0)   # rad/s, both devices
    gyro_bias_sigma: float = 0.0         # per-device random z bias, rad/s
    mag_offset_deg: float = 0.0          # hard-iron heading offset
    mag_offset_right_deg: float | None = None  # right-device override
    tilt_roll_deg: float = 0.0
    tilt_pitch_deg: float = 0.0
    mag_horizontal: float = 1.0
    mag_vertical: float = 1.2
    phone_noise_deg: float = 1.0
    two_devices: bool = True
    seed: int = 0

    def __post_init__(self):
        pts = tuple(tuple(map(float, p)) for p in self.waypoints)
        if len(pts) < 2:
            raise ValueError("polyline needs at least 2 waypoints")
        object.__setattr__(self, "waypoints", pts)
        for name in ("speed", "step_freq", "step_amp", "height", "rate_hz"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class SynthOutput:
    """Traces plus the ground truth they were generated from."""

    left: DeviceTrace
    right: DeviceTrace | None
    phone: DeviceTrace
    truth_t: np.ndarray
    truth_xy: np.ndarray
    truth_heading: np.ndarray
    stride_times: np.ndarray
    scenario: SynthScenario

    @property
    def truth_track(self):
        return Track(t=self.truth_t, xy=self.truth_xy)


class _HeadingSchedule:
    """Analytic heading / turn-rate / speed profile of a scenario."""

    def __init__(self, scenario):
        pts = np.asarray(scenario.waypoints, dtype=float)
        seg = np.diff(pts, axis=0)
        lengths = np.linalg.norm(seg, axis=1)
        if np.any(lengths == 0):
            raise ValueError("degenerate polyline: zero-length segment")
        self.headings = np.arctan2(seg[:, 1], seg[:, 0])
        self.total_length = float(lengths.sum())
        self.walk_start = scenario.lead_in_s
        self.walk_end = self.walk_start + self.total_length / scenario.speed
        arrival = self.walk_start + np.cumsum(lengths) / scenario.speed
        td = scenario.turn_duration_s
        self.turns = []  # (t_start, t_end, psi_from, delta)
        for i in range(len(self.headings) - 1):
            delta = circular_diff(self.headings[i + 1], self.headings[i])
            self.turns.append((arrival[i] - td / 2.0, arrival[i] + td / 2.0,
                               self.headings[i], delta))
        for (s0, e0), (s1, _) in zip(
                [(s, e) for s, e, *_ in self.turns],
                [(s, e) for s, e, *_ in self.turns][1:]):
            if s1 < e0:
                raise ValueError("segments too short: overlapping turns")
        self.speed = scenario.speed
        self.duration = self.walk_end + scenario.outro_s

    def heading(self, t):
        t = np.asarray(t, dtype=float)
        psi = np.full(t.shape, self.headings[0])
        for k, (s, e, psi_from, delta) in enumerate(self.turns):
            tau = np.clip((t - s) / (e - s), 0.0, 1.0)
            ramp = tau - np.sin(2.0 * np.pi * tau) / (2.0 * np.pi)
            psi = np.where(t >= s, psi_from + delta * ramp, psi)
        return psi

    def turn_rate(self, t):
        t = np.asarray(t, dtype=float)
        rate = np.zeros(t.shape)
        for s, e, _, delta in self.turns:
            inside = (t >= s) & (t <= e)
            tau = (t - s) / (e - s)
            w = delta / (e - s) * (1.0 - np.cos(2.0 * np.pi * tau))
            rate = np.where(inside, w, rate)
        return rate

    def speed_profile(self, t):
        t = np.asarray(t, dtype=float)
        walking = (t >= self.walk_start) & (t <= self.walk_end)
        return np.where(walking, self.speed, 0.0)


def _device_trace(scenario, schedule, t, psi, omega, device_id, rng,
                  mag_offset_rad):
    n = t.size
    phi = math.radians(scenario.tilt_roll_deg)
    theta = math.radians(scenario.tilt_pitch_deg)
    tilt_t = (rot_y(theta) @ rot_x(phi)).T  # world/flat -> device

    walking = (t >= schedule.walk_start) & (t <= schedule.walk_end)
    osc = np.where(
        walking,
        scenario.step_amp * np.sin(2.0 * np.pi * scenario.step_freq
                                   * (t - schedule.walk_start)),
        0.0)
    acc_flat = np.column_stack([np.zeros(n), np.zeros(n), GRAVITY + osc])
    acc = acc_flat @ tilt_t.T

    z_dev = tilt_t @ np.array([0.0, 0.0, 1.0])
    bias = np.asarray(scenario.gyro_bias, dtype=float).copy()
    if scenario.gyro_bias_sigma > 0:
        bias = bias + np.array([0.0, 0.0,
                                rng.normal(0.0, scenario.gyro_bias_sigma)])
    gyro = np.outer(omega, z_dev) + bias

    psi_mag = psi + mag_offset_rad
    mag_flat = np.column_stack([
        scenario.mag_horizontal * np.cos(psi_mag),
        scenario.mag_horizontal * np.sin(psi_mag),
        np.full(n, scenario.mag_vertical)])
    mag = mag_flat @ tilt_t.T

    if scenario.noise_acc > 0:
        acc = acc + rng.normal(0.0, scenario.noise_acc, acc.shape)
    if scenario.noise_gyro > 0:
        gyro = gyro + rng.normal(0.0, scenario.noise_gyro, gyro.shape)
    if scenario.noise_mag > 0:
        mag = mag + rng.normal(0.0, scenario.noise_mag, mag.shape)

    trace = DeviceTrace(device_id=device_id, rate_hz=scenario.rate_hz,
                        t=t, acc=acc, gyro=gyro, mag=mag)
    if scenario.accel_inject is not None:
        trace = inject_miscalibration(trace, scenario.accel_inject)
    return trace


def generate(scenario):
    """Generate a SynthOutput. Byte-deterministic for a fixed scenario."""
    schedule = _HeadingSchedule(scenario)
    dt = 1.0 / scenario.rate_hz
    n = int(np.floor(schedule.duration / dt + 1e-9)) + 1
    t = np.arange(n) * dt

    psi = schedule.heading(t)
    omega = schedule.turn_rate(t)
    v = schedule.speed_profile(t)
    x0, y0 = scenario.waypoints[0]
    xy = np.column_stack([
        x0 + cumulative_trapezoid(v * np.cos(psi), t, initial=0.0),
        y0 + cumulative_trapezoid(v * np.sin(psi), t, initial=0.0)])

    n_strides = int(np.floor((schedule.walk_end - schedule.walk_start)
                             * scenario.step_freq + 1e-9))
    stride_times = (schedule.walk_start
                    + (np.arange(n_strides) + 0.25) / scenario.step_freq)
    stride_times = stride_times[stride_times <= schedule.walk_end]

    off_left = math.radians(scenario.mag_offset_deg)
    off_right = math.radians(scenario.mag_offset_right_deg
                             if scenario.mag_offset_right_deg is not None
                             else scenario.mag_offset_deg)
    left = _device_trace(scenario, schedule, t, psi, omega, "left",
                         np.random.default_rng([scenario.seed, 1]), off_left)
    right = None
    if scenario.two_devices:
        right = _device_trace(scenario, schedule, t, psi, omega, "right",
                              np.random.default_rng([scenario.seed, 2]),
                              off_right)

    prng = np.random.default_rng([scenario.seed, 3])
    ref = psi.copy()
    if scenario.phone_noise_deg > 0:
        ref = ref + prng.normal(0.0, math.radians(scenario.phone_noise_deg),
                                n)
    phone = DeviceTrace(
        device_id="phone", rate_hz=scenario.rate_hz, t=t,
        acc=np.tile([0.0, 0.0, GRAVITY], (n, 1)),
        gyro=np.zeros((n, 3)),
        mag=np.column_stack([np.cos(psi), np.sin(psi),
                             np.full(n, scenario.mag_vertical)]),
        ref_heading=wrap_angle(ref))

    return SynthOutput(left=left, right=right, phone=phone, truth_t=t,
                       truth_xy=xy, truth_heading=wrap_angle(psi),
                       stride_times=stride_times, scenario=scenario)


def inject_miscalibration(trace, calib):
    """Apply the inverse accelerometer model to a trace's accel channels.

    Applying the forward calibration with the same parameters restores
    the original trace.
    """
    return trace.replace(acc=calib.unapply(trace.acc))


def generate_calibration_trace(calib=None, n_orientations=12, hold_s=1.5,
                               gap_s=0.5, rate_hz=20.0, noise_acc=0.0,
                               seed=0):
    """Static multi-orientation recording for accelerometer fitting.

    The device rests in n random orientations for hold_s each, separated
    by short motion bursts (norm excursions) so stationary segmentation
    can split the clips.
    """
    rng = np.random.default_rng(seed)
    dt = 1.0 / rate_hz
    t_list, acc_list = [], []
    t_cur = 0.0
    for _ in range(n_orientations):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(0.0, np.pi)
        k = np.array([[0, -axis[2], axis[1]],
                      [axis[2], 0, -axis[0]],
                      [-axis[1], axis[0], 0]])
        rot = (np.eye(3) + np.sin(angle) * k
               + (1 - np.cos(angle)) * (k @ k))
        g_dev = rot.T @ np.array([0.0, 0.0, GRAVITY])
        n_hold = int(round(hold_s * rate_hz))
        t_hold = t_cur + np.arange(n_hold) * dt
        acc_hold = np.tile(g_dev, (n_hold, 1))
        t_list.append(t_hold)
        acc_list.append(acc_hold)
        t_cur = t_hold[-1] + dt
        n_gap = int(round(gap_s * rate_hz))
        t_gap = t_cur + np.arange(n_gap) * dt
        # shake along the gravity direction so the norm excursion breaks
        # stationarity regardless of orientation
        shake = 2.0 * np.sin(2.0 * np.pi * 4.0 * (t_gap - t_cur))
        acc_gap = np.tile(g_dev, (n_gap, 1))
        acc_gap += shake[:, None] * (g_dev / np.linalg.norm(g_dev))
        t_list.append(t_gap)
        acc_list.append(acc_gap)
        t_cur = t_gap[-1] + dt
    t = np.concatenate(t_list)
    acc = np.concatenate(acc_list)
    if noise_acc > 0:
        acc = acc + rng.normal(0.0, noise_acc, acc.shape)
    n = t.size
    trace = DeviceTrace(device_id="calib", rate_hz=rate_hz, t=t, acc=acc,
                        gyro=np.zeros((n, 3)),
                        mag=np.tile([1.0, 0.0, 1.2], (n, 1)))
    if calib is not None:
        trace = inject_miscalibration(trace, calib)
    return trace


# --- ground-truth sidecar file: t, x_m, y_m, heading_deg, stride_flag ---

TRUTH_HEADER = "t,x_m,y_m,heading_deg,stride_flag"


def write_truth(output, path):
    flags = np.zeros(output.truth_t.size, dtype=int)
    idx = np.searchsorted(output.truth_t, output.stride_times)
    flags[np.clip(idx, 0, flags.size - 1)] = 1
    lines = [TRUTH_HEADER]
    deg = np.degrees(output.truth_heading)
    for k in range(output.truth_t.size):
        lines.append(f"{output.truth_t[k]:.9f},"
                     f"{float(output.truth_xy[k, 0])!r},"
                     f"{float(output.truth_xy[k, 1])!r},"
                     f"{float(deg[k])!r},{flags[k]}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_truth(path):
    """Returns (t, xy, heading_rad, stride_flags)."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != TRUTH_HEADER:
        raise ValueError("bad ground-truth file header")
    rows = np.array([[float(p) for p in line.split(",")]
                     for line in lines[1:]])
    return (rows[:, 0], rows[:, 1:3], np.radians(rows[:, 3]),
            rows[:, 4].astype(int))


# --- scenario presets ---

def square_loop_scenario(side=10.0, **kwargs):
    """Closed square walk, counter-clockwise, starting and ending at origin."""
    pts = ((0.0, 0.0), (side, 0.0), (side, side), (0.0, side), (0.0, 0.0))
    return SynthScenario(waypoints=pts, **kwargs)


def corridor_scenario(length=10.0, laps=3, **kwargs):
    """Indoor-style out-and-back corridor walk (2 * laps lengths)."""
    pts = [(0.0, 0.0)]
    for k in range(2 * laps):
        pts.append((length if k % 2 == 0 else 0.0, 0.0))
    kwargs.setdefault("turn_duration_s", 0.5)
    return SynthScenario(waypoints=tuple(pts), **kwargs)


def line_scenario(distance=10.0, **kwargs):
    return SynthScenario(waypoints=((0.0, 0.0), (distance, 0.0)), **kwargs)
