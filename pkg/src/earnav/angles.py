"""Circular (wrapped-angle) arithmetic.

All angles are radians. The canonical representation is the half-open
interval [0, 2*pi); signed differences live in (-pi, pi] with the
antipodal tie broken toward +pi so results are deterministic.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(x):
    """Wrap an angle (scalar or array) into [0, 2*pi)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite angle")
    w = np.mod(x, TWO_PI)
    # mod can return 2*pi for tiny negative inputs due to rounding
    w = np.where(w >= TWO_PI, 0.0, w)
    return float(w) if w.ndim == 0 else w


def circular_diff(a, b):
    """Signed shortest-arc difference a - b in (-pi, pi].

    Satisfies wrap_angle(b + circular_diff(a, b)) == wrap_angle(a).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = np.mod(a - b, TWO_PI)
    d = np.where(d > np.pi, d - TWO_PI, d)
    return float(d) if d.ndim == 0 else d


def circular_mean(angles, weights=None):
    """Weighted circular mean, wrapped to [0, 2*pi).

    Raises ValueError when the resultant vector vanishes (e.g. two
    perfectly opposed angles), where the mean is undefined.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.size == 0:
        raise ValueError("circular_mean of empty sequence")
    if weights is None:
        weights = np.ones_like(angles)
    else:
        weights = np.asarray(weights, dtype=float)
        if np.any(weights < 0):
            raise ValueError("negative weight")
        if not np.any(weights > 0):
            raise ValueError("all weights zero")
    c = np.sum(weights * np.cos(angles))
    s = np.sum(weights * np.sin(angles))
    r = np.hypot(c, s)
    if r < 1e-12 * np.sum(weights):
        raise ValueError("undefined mean: zero resultant vector")
    return wrap_angle(np.arctan2(s, c))


def circular_blend(a, b, weight_a):
    """Linear interpolation along the shortest arc from b to a.

    weight_a = 1 returns a, weight_a = 0 returns b; the result always
    lies on the shortest arc between the two inputs. Unlike the
    resultant-vector mean this reproduces scalar weighted averages
    exactly when the inputs are within pi of each other.
    """
    return wrap_angle(np.asarray(b, dtype=float)
                      + weight_a * circular_diff(a, b))


def unwrap_series(angles):
    """Lift wrapped angles to a continuous real-valued series."""
    return np.unwrap(np.asarray(angles, dtype=float))


def interp_circular(t_new, t, angles):
    """Interpolate a wrapped angle series onto new timestamps."""
    lifted = unwrap_series(angles)
    return wrap_angle(np.interp(t_new, t, lifted))
