"""Dual-device and GPS-aided particle-filter fusion.

The heading filter carries N wrapped-angle particles: diffuse with
wrapped Gaussian process noise, weight by the product of both devices'
Gaussian-on-circular-difference likelihoods, systematically resample
when the effective sample size drops below N/2. The position filter
propagates particles with dead-reckoned displacement increments and
re-weights/resamples against each GPS fix (Gaussian likelihood).

Process noise for the position filter is injected lazily (accumulated
between fixes and drawn just before a fix update), which is
statistically equivalent to per-step injection and keeps the fix-free
output exactly equal to the dead-reckoned input.
"""

from dataclasses import dataclass

import numpy as np

from .angles import circular_diff, circular_mean, wrap_angle
from .displacement import StrideEvent, Track
from .heading import HeadingSeries


@dataclass(frozen=True)
class GpsFix:
    """Absolute position observation in the local tangent frame."""

    t: float
    x: float
    y: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("GPS sigma must be positive")


def systematic_resample(weights, rng):
    n = weights.size
    positions = (rng.random() + np.arange(n)) / n
    return np.searchsorted(np.cumsum(weights), positions)


def fuse_headings(left, right, n_particles=500, process_noise=0.105,
                  meas_noise=0.14, seed=0, ess_fraction=0.5):
    """Combine two aligned heading series with a particle filter.

    Noise parameters are radians. Deterministic for a fixed seed; output
    is the weighted circular mean of the particle cloud per timestamp.
    """
    if len(left) != len(right) or not np.allclose(left.t, right.t,
                                                  atol=1e-9):
        raise ValueError("heading series are not on the same grid")
    rng = np.random.default_rng(seed)
    n = len(left)
    init = wrap_angle(left.psi[0]
                      + 0.5 * circular_diff(right.psi[0], left.psi[0]))
    particles = wrap_angle(init + rng.normal(0.0, meas_noise, n_particles))
    weights = np.full(n_particles, 1.0 / n_particles)
    inv_two_var = 1.0 / (2.0 * meas_noise * meas_noise)
    psi = np.empty(n)
    for k in range(n):
        particles = wrap_angle(particles
                               + rng.normal(0.0, process_noise, n_particles))
        dl = circular_diff(particles, left.psi[k])
        dr = circular_diff(particles, right.psi[k])
        logw = -(dl * dl + dr * dr) * inv_two_var
        logw -= logw.max()
        weights = weights * np.exp(logw)
        weights /= weights.sum()
        psi[k] = circular_mean(particles, weights)
        if 1.0 / np.sum(weights * weights) < ess_fraction * n_particles:
            particles = particles[systematic_resample(weights, rng)]
            weights = np.full(n_particles, 1.0 / n_particles)
    return HeadingSeries(t=left.t, psi=psi, method="complementary",
                         tilt=left.tilt)


def average_stride_times(left_strides, right_strides, match_factor=0.4):
    """Merge per-device stride peak times.

    Greedy nearest matching within match_factor * median stride period;
    matched peaks are averaged, unmatched peaks are kept. Returns sorted
    peak times.
    """
    lt = np.array([ev.peak_time for ev in left_strides])
    rt = np.array([ev.peak_time for ev in right_strides])
    if lt.size == 0 or rt.size == 0:
        return np.sort(np.concatenate([lt, rt]))
    periods = np.concatenate([np.diff(lt), np.diff(rt)])
    tol = match_factor * (np.median(periods) if periods.size
                          else np.inf)
    pairs = sorted(((abs(a - b), i, j) for i, a in enumerate(lt)
                    for j, b in enumerate(rt) if abs(a - b) <= tol))
    used_l, used_r = set(), set()
    merged = []
    for _, i, j in pairs:
        if i in used_l or j in used_r:
            continue
        used_l.add(i)
        used_r.add(j)
        merged.append(0.5 * (lt[i] + rt[j]))
    merged.extend(lt[i] for i in range(lt.size) if i not in used_l)
    merged.extend(rt[j] for j in range(rt.size) if j not in used_r)
    return np.sort(np.array(merged))


def strides_from_peak_times(peak_times, t, prominence=np.nan):
    """Rebuild tiling StrideEvents from merged peak times on a grid."""
    peak_times = np.sort(np.asarray(peak_times, dtype=float))
    if peak_times.size == 0:
        return []
    idx = np.searchsorted(t, peak_times - 1e-12)
    idx = np.clip(idx, 0, t.size - 1)
    bounds = np.concatenate(([0], (idx[:-1] + idx[1:]) // 2, [t.size]))
    events = []
    for k in range(peak_times.size):
        i, j = int(bounds[k]), int(bounds[k + 1])
        if j <= i:
            continue  # coincident peaks collapse to one span
        events.append(StrideEvent(peak_time=float(peak_times[k]),
                                  span=(i, j), prominence=prominence))
    return events


def gps_position_filter(track, fixes, n_particles=1000,
                        process_noise=2.0, seed=0):
    """Correct a dead-reckoned track with sparse GPS fixes.

    process_noise is meters per sqrt(second). With no fixes the output
    equals the input track exactly. Raises ValueError for a fix before
    the track starts.
    """
    fixes = sorted(fixes, key=lambda f: f.t)
    t = track.t
    if fixes and fixes[0].t < t[0] - 1e-9:
        raise ValueError("GPS fix before track start")
    fix_at = {}
    for fix in fixes:
        k = int(np.argmin(np.abs(t - fix.t)))
        fix_at[k] = fix

    rng = np.random.default_rng(seed)
    particles = np.tile(track.xy[0], (n_particles, 1))
    out = np.empty_like(track.xy)
    out[0] = track.xy[0]
    pending_var = 0.0
    var_rate = process_noise * process_noise
    for k in range(1, t.size):
        particles = particles + (track.xy[k] - track.xy[k - 1])
        pending_var += var_rate * (t[k] - t[k - 1])
        fix = fix_at.get(k)
        if fix is None:
            out[k] = particles.mean(axis=0)
            continue
        particles = particles + rng.normal(
            0.0, np.sqrt(pending_var), particles.shape)
        pending_var = 0.0
        d2 = ((particles[:, 0] - fix.x) ** 2
              + (particles[:, 1] - fix.y) ** 2)
        logw = -d2 / (2.0 * fix.sigma * fix.sigma)
        logw -= logw.max()
        weights = np.exp(logw)
        weights /= weights.sum()
        out[k] = weights @ particles
        particles = particles[systematic_resample(weights, rng)]
    return Track(t=t, xy=out, strides=track.strides)


def make_gps_fixes(t, xy, period=30.0, sigma=3.9, seed=0):
    """Synthesize fixes from a ground-truth path: truth + N(0, sigma^2)."""
    rng = np.random.default_rng(seed)
    fixes = []
    next_t = t[0] + period
    for k in range(t.size):
        if t[k] + 1e-9 >= next_t:
            noise = rng.normal(0.0, sigma, 2)
            fixes.append(GpsFix(t=float(t[k]), x=float(xy[k, 0] + noise[0]),
                                y=float(xy[k, 1] + noise[1]),
                                sigma=sigma))
            next_t += period
    return fixes


def write_gps_fixes(fixes, path):
    lines = ["t,x_m,y_m,sigma_m"]
    lines += [f"{f.t:.9f},{f.x!r},{f.y!r},{f.sigma!r}" for f in fixes]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_gps_fixes(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "t,x_m,y_m,sigma_m":
        raise ValueError("bad GPS fix file header")
    fixes = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 4 fields")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: malformed number") from exc
        fixes.append(GpsFix(t=vals[0], x=vals[1], y=vals[2], sigma=vals[3]))
    return fixes
