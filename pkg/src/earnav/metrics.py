"""Evaluation metrics: tracking drift, heading error, paired t-test."""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .angles import circular_diff, interp_circular
from .datamodel import Position2D


@dataclass(frozen=True)
class DriftReport:
    """Final-position error divided by elapsed time, m/s."""

    drift: float
    duration: float
    final_position: Position2D


@dataclass(frozen=True)
class HeadingErrorReport:
    mean_abs_error_deg: float
    std_dev_deg: float
    errors_deg: np.ndarray


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    significant: bool
    degenerate: bool
    df: int
    critical: float


def drift(track, reference=(0.0, 0.0)):
    """Tracking drift: ||final position - reference|| / duration.

    The default reference is the origin, matching closed-loop walks
    that start and end at the same point; pass the ground-truth final
    position for open paths.
    """
    if len(track) == 0:
        raise ValueError("empty track")
    duration = track.duration
    if duration <= 0:
        raise ValueError("track duration must be positive")
    final = track.final_position
    err = float(np.hypot(final.x - reference[0], final.y - reference[1]))
    return DriftReport(drift=err / duration, duration=duration,
                       final_position=final)


def heading_error(estimate, reference_t, reference_psi):
    """Mean and standard deviation of |circular difference|, degrees.

    The reference is interpolated circularly onto the estimate's
    timestamps; estimate samples outside the reference's time range are
    ignored, and fully disjoint ranges are an error.
    """
    reference_t = np.asarray(reference_t, dtype=float)
    inside = ((estimate.t >= reference_t[0] - 1e-9)
              & (estimate.t <= reference_t[-1] + 1e-9))
    if not np.any(inside):
        raise ValueError("estimate and reference time ranges are disjoint")
    ref = interp_circular(estimate.t[inside], reference_t, reference_psi)
    errs = np.degrees(np.abs(circular_diff(estimate.psi[inside], ref)))
    return HeadingErrorReport(mean_abs_error_deg=float(np.mean(errs)),
                              std_dev_deg=float(np.std(errs)),
                              errors_deg=errs)


def paired_t_test(errors_a, errors_b, alpha=0.05):
    """Two-sided paired t-test on equal-length samples.

    Zero-variance differences are flagged degenerate: a non-zero mean
    difference is reported significant (t = +/-inf), identical samples
    give t = 0, not significant.
    """
    a = np.asarray(errors_a, dtype=float)
    b = np.asarray(errors_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("samples must be equal-length 1-D arrays")
    n = a.size
    if n < 2:
        raise ValueError("need at least 2 pairs")
    d = a - b
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    df = n - 1
    critical = float(stats.t.ppf(1.0 - alpha / 2.0, df))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, False, True, df, critical)
        return TTestResult(float(np.sign(mean)) * np.inf, True, True, df,
                           critical)
    t_stat = mean / (sd / np.sqrt(n))
    return TTestResult(float(t_stat), bool(abs(t_stat) > critical), False,
                       df, critical)
