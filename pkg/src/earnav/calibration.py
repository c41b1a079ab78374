"""Nine-axis IMU calibration.

Three procedures:
    - Accelerometer: lower-triangular misalignment, per-axis scale factor
      and bias, fitted by Levenberg-Marquardt on the gravity-norm residual
      of static clips in distinct orientations.
    - Gyroscope: rotational offset between the integrated gyro heading
      and the magnetic heading, estimated while the device is near-static
      (| ||acc|| - g | below a threshold).
    - Magnetometer: hard-iron heading offset from phone reference points,
      kept in a rolling window of at most fifteen entries spaced >= 15 s,
      fully reset (down to the newest point) when the heading rolls over
      across the 0/360 boundary.
"""

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .angles import circular_diff, circular_mean, wrap_angle
from .datamodel import GRAVITY


class CalibrationError(RuntimeError):
    """Numerical failure during calibration fitting."""


@dataclass(frozen=True)
class AccelCalib:
    """Accelerometer correction a' = M @ diag(sf) @ (a - bias).

    M is unit lower triangular with entries alpha_yx, alpha_zx, alpha_zy.
    """

    alpha_yx: float = 0.0
    alpha_zx: float = 0.0
    alpha_zy: float = 0.0
    sf: tuple = (1.0, 1.0, 1.0)
    bias: tuple = (0.0, 0.0, 0.0)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_params(cls, p):
        p = np.asarray(p, dtype=float)
        return cls(alpha_yx=float(p[0]), alpha_zx=float(p[1]),
                   alpha_zy=float(p[2]), sf=tuple(p[3:6]), bias=tuple(p[6:9]))

    def params(self):
        return np.array([self.alpha_yx, self.alpha_zx, self.alpha_zy,
                         *self.sf, *self.bias])

    def matrix(self):
        m = np.array([[1.0, 0.0, 0.0],
                      [self.alpha_yx, 1.0, 0.0],
                      [self.alpha_zx, self.alpha_zy, 1.0]])
        return m @ np.diag(self.sf)

    def apply(self, a):
        """Correct raw readings; accepts a 3-vector or an (n, 3) array."""
        a = np.asarray(a, dtype=float)
        return (a - np.asarray(self.bias)) @ self.matrix().T

    def unapply(self, a_true):
        """Inverse transform: synthesize raw readings from true ones."""
        if min(abs(s) for s in self.sf) < 1e-12:
            raise ValueError("singular scale factor")
        a_true = np.asarray(a_true, dtype=float)
        inv = np.linalg.inv(self.matrix())
        return a_true @ inv.T + np.asarray(self.bias)

    def is_sane(self):
        sf_ok = all(0.5 < s < 2.0 for s in self.sf)
        al_ok = all(abs(a) < 0.2 for a in
                    (self.alpha_yx, self.alpha_zx, self.alpha_zy))
        b_ok = all(abs(b) < 2.0 for b in self.bias)
        return sf_ok and al_ok and b_ok


def _numeric_jacobian(fn, p, r0):
    jac = np.empty((r0.size, p.size))
    for k in range(p.size):
        h = 1e-7 * max(1.0, abs(p[k]))
        pp = p.copy()
        pp[k] += h
        pm = p.copy()
        pm[k] -= h
        jac[:, k] = (fn(pp) - fn(pm)) / (2.0 * h)
    return jac


def levenberg_marquardt(residual_fn, p0, max_iter=200, gtol=1e-10,
                        lambda0=1e-3):
    """Classic Levenberg-Marquardt with x10 / /10 damping adaptation.

    Returns (params, rms_residual, n_iter). Raises CalibrationError when
    the gradient tolerance is not met within max_iter iterations.
    """
    p = np.asarray(p0, dtype=float).copy()
    r = residual_fn(p)
    cost = 0.5 * float(r @ r)
    lam = lambda0
    for it in range(1, max_iter + 1):
        jac = _numeric_jacobian(residual_fn, p, r)
        grad = jac.T @ r
        if np.max(np.abs(grad)) < gtol or cost < 1e-24:
            return p, np.sqrt(2.0 * cost / r.size), it
        jtj = jac.T @ jac
        accepted = False
        while lam < 1e12:
            try:
                step = np.linalg.solve(jtj + lam * np.eye(p.size), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_new = p + step
            r_new = residual_fn(p_new)
            cost_new = 0.5 * float(r_new @ r_new)
            if cost_new < cost:
                p, r, cost = p_new, r_new, cost_new
                lam = max(lam / 10.0, 1e-14)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # damping exhausted: local minimum to working precision
            return p, np.sqrt(2.0 * cost / r.size), it
    raise CalibrationError(
        f"Levenberg-Marquardt did not converge in {max_iter} iterations"
        f" (rms residual {np.sqrt(2.0 * cost / r.size):.3e})")


class AccelCalibrator(BaseEstimator, TransformerMixin):
    """Fits the accelerometer model on static-clip mean vectors.

    fit(X) takes an (n_clips, 3) array of mean raw accelerations, one row
    per static orientation, and minimizes sum((||a'|| - g)^2) over the
    nine model parameters. transform(X) applies the fitted correction
    row-wise.
    """

    def __init__(self, gravity=GRAVITY, max_iter=200, gtol=1e-10,
                 lambda0=1e-3, min_orientations=9):
        self.gravity = gravity
        self.max_iter = max_iter
        self.gtol = gtol
        self.lambda0 = lambda0
        self.min_orientations = min_orientations

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        if X.shape[1] != 3:
            raise ValueError("X must have 3 columns (ax, ay, az)")
        n_distinct = _count_distinct_orientations(X)
        if n_distinct < self.min_orientations:
            raise ValueError(
                f"insufficient orientations: {n_distinct} distinct"
                f" (need >= {self.min_orientations})")

        g = self.gravity

        def residual(p):
            calib = AccelCalib.from_params(p)
            return np.linalg.norm(calib.apply(X), axis=1) - g

        p0 = AccelCalib.identity().params()
        p, rms, n_iter = levenberg_marquardt(
            residual, p0, max_iter=self.max_iter, gtol=self.gtol,
            lambda0=self.lambda0)
        calib = AccelCalib.from_params(p)
        if not calib.is_sane():
            raise CalibrationError(
                f"fitted parameters outside sanity bounds: {calib}")
        self.calib_ = calib
        self.residual_rms_ = float(rms)
        self.n_iter_ = int(n_iter)
        return self

    def transform(self, X):
        check_is_fitted(self, "calib_")
        X = check_array(X)
        if X.shape[1] != 3:
            raise ValueError("X must have 3 columns (ax, ay, az)")
        return self.calib_.apply(X)


def _count_distinct_orientations(means, min_angle_deg=5.0):
    units = means / np.linalg.norm(means, axis=1, keepdims=True)
    kept = []
    threshold = np.cos(np.radians(min_angle_deg))
    for u in units:
        if all(u @ v < threshold for v in kept):
            kept.append(u)
    return len(kept)


def clip_means(static_clips, gravity=GRAVITY, max_norm_std=0.5):
    """Reduce raw static clips to mean vectors, rejecting moving clips.

    Each clip is an (n, 3) array (or a list of ImuSample, whose acc
    fields are used). A clip whose acceleration-norm standard deviation
    exceeds max_norm_std is not near-static.
    """
    means = []
    for idx, clip in enumerate(static_clips):
        arr = np.asarray([s.acc for s in clip] if hasattr(clip[0], "acc")
                         else clip, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"clip {idx}: expected (n, 3) accelerations")
        norms = np.linalg.norm(arr, axis=1)
        if np.std(norms) > max_norm_std:
            raise ValueError(f"clip {idx}: not near-static"
                             f" (norm std {np.std(norms):.3f} m/s^2)")
        means.append(arr.mean(axis=0))
    return np.asarray(means)


def fit_accel_calibration(static_clips, gravity=GRAVITY, **kwargs):
    """Fit the accelerometer model from static clips.

    Returns (AccelCalib, rms_residual). Raises ValueError for too few
    distinct orientations and CalibrationError on non-convergence.
    """
    means = clip_means(static_clips, gravity=gravity)
    est = AccelCalibrator(gravity=gravity, **kwargs).fit(means)
    return est.calib_, est.residual_rms_


def apply_accel_calibration(a, calib):
    return calib.apply(a)


# --- gyroscope heading offset ---

@dataclass(frozen=True)
class GyroCalib:
    """Heading offset between integrated-gyro and magnetic heading."""

    heading_offset: float  # radians, wrapped
    calibrated_at: float   # seconds


def stationary_windows(t, acc, tol=0.3, min_duration=1.0, gravity=GRAVITY):
    """Index ranges [i0, i1) where | ||acc|| - g | < tol for >= min_duration."""
    t = np.asarray(t, dtype=float)
    still = np.abs(np.linalg.norm(np.asarray(acc, dtype=float), axis=1)
                   - gravity) < tol
    windows = []
    start = None
    for i, flag in enumerate(np.append(still, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if t[i - 1] - t[start] >= min_duration:
                windows.append((start, i))
            start = None
    return windows


def calibrate_gyro(t, acc, gyro_heading, mag_heading, tol=0.3,
                   min_duration=1.0, gravity=GRAVITY):
    """Offset between magnetic and integrated-gyro heading when static.

    The offset is the circular mean of circular_diff(mag, gyro) over the
    first stationary window. Raises ValueError when the trace contains
    no stationary window.
    """
    windows = stationary_windows(t, acc, tol=tol, min_duration=min_duration,
                                 gravity=gravity)
    if not windows:
        raise ValueError("no stationary window found in trace")
    i0, i1 = windows[0]
    diffs = circular_diff(np.asarray(mag_heading)[i0:i1],
                          np.asarray(gyro_heading)[i0:i1])
    offset = circular_mean(wrap_angle(diffs))
    return GyroCalib(heading_offset=offset, calibrated_at=float(t[i0]))


# --- magnetometer rolling-window offset ---

@dataclass(frozen=True)
class MagCalibState:
    """Rolling window of phone-referenced heading offsets.

    Value-semantic: every mutation returns a new state. The window holds
    at most `cap` (time, offset) pairs spaced at least `period` seconds;
    current_offset is the circular mean of the window (0 when empty).
    """

    window: tuple = ()
    current_offset: float = 0.0
    last_point_time: float = -np.inf
    dropped: int = 0
    cap: int = 15
    period: float = 15.0


def _window_mean(window):
    if not window:
        return 0.0
    return circular_mean(np.array([wrap_angle(off) for _, off in window]))


def mag_add_reference_point(state, t, phone_heading, earable_heading):
    """Append an offset point; sub-period points are dropped silently."""
    if t < state.last_point_time + state.period:
        return replace(state, dropped=state.dropped + 1)
    offset = circular_diff(phone_heading, earable_heading)
    window = (state.window + ((float(t), float(offset)),))[-state.cap:]
    return replace(state, window=window, current_offset=_window_mean(window),
                   last_point_time=float(t))


def mag_check_rollover(state, prev_heading, new_heading):
    """Reset the window to the newest point on a 0/360 heading rollover."""
    prev = wrap_angle(prev_heading)
    d = circular_diff(new_heading, prev_heading)
    if 0.0 <= prev + d < 2.0 * np.pi:
        return state
    window = state.window[-1:]
    return replace(state, window=window, current_offset=_window_mean(window))
