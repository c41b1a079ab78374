"""Trace and run-configuration file I/O, plus rate conversion.

Trace file format (UTF-8, LF line endings, comma-separated):

    # device_id=<id> rate_hz=<rate>
    t,ax,ay,az,gx,gy,gz,mx,my,mz[,ref_heading_deg]
    0.000000000,0.0,0.0,9.80665,...

Timestamps carry nine decimal places; channel values use Python float
repr so that write(load(f)) is byte-identical for canonically formatted
files. Angles are degrees on disk, radians in memory.
"""

from dataclasses import dataclass, fields

import numpy as np

from .angles import interp_circular, wrap_angle
from .datamodel import DeviceTrace

TRACE_COLUMNS = ("t", "ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz")
REF_COLUMN = "ref_heading_deg"


class TraceFormatError(ValueError):
    """Malformed or inconsistent trace file."""


class ConfigError(ValueError):
    """Malformed or out-of-range run configuration."""


@dataclass
class RunConfig:
    """Flat run configuration; serialized as key=value lines."""

    user_height_m: float = 1.80
    rate_hz: float = 20.0
    seed: int = 0
    # complementary-filter schedule: gyro weight alpha0 - t * alpha_slope,
    # clamped to [0, 1]
    alpha0: float = 0.8
    alpha_slope_per_s: float = 1.0 / 400.0
    # stride detection
    lowpass_cutoff_hz: float = 3.0
    stride_prominence: float = 0.8
    stride_match_factor: float = 0.4
    # stationarity gate
    stationary_tol_ms2: float = 0.3
    stationary_window_s: float = 1.0
    # magnetometer rolling-window calibration
    mag_calib_period_s: float = 15.0
    mag_window_cap: int = 15
    # heading particle filter
    heading_particles: int = 500
    heading_process_noise_deg: float = 6.0
    heading_meas_noise_deg: float = 8.0
    # GPS-aided position particle filter
    position_particles: int = 1000
    gps_period_s: float = 30.0
    gps_sigma_m: float = 3.9
    dr_process_noise_m: float = 2.0  # per sqrt(second)
    # baselines / toggles
    madgwick_gain: float = 0.1
    gyro_recalibrate: bool = True
    reset_schedule_on_rollover: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = ["rate_hz", "lowpass_cutoff_hz", "stride_prominence",
                    "stationary_tol_ms2", "stationary_window_s",
                    "mag_calib_period_s", "mag_window_cap",
                    "heading_particles", "heading_process_noise_deg",
                    "heading_meas_noise_deg", "position_particles",
                    "gps_period_s", "gps_sigma_m", "dr_process_noise_m",
                    "madgwick_gain", "stride_match_factor"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be strictly positive")
        if not 0.5 <= self.user_height_m <= 2.5:
            raise ConfigError("user_height_m must be in [0.5, 2.5]")
        if self.alpha_slope_per_s < 0:
            raise ConfigError("alpha_slope_per_s must be non-negative")

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name}={v!r}" if isinstance(v, float)
                         else f"{f.name}={v}")
        return "\n".join(lines) + "\n"


def _parse_config_value(ftype, raw, key):
    raw = raw.strip()
    if ftype is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"bad boolean for {key}: {raw!r}")
    try:
        return ftype(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config(text):
    """Parse key=value lines into a RunConfig. Unknown keys are errors."""
    known = {f.name: f.type for f in fields(RunConfig)}
    types = {"float": float, "int": int, "bool": bool}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        ftype = known[key]
        if isinstance(ftype, str):
            ftype = types[ftype]
        values[key] = _parse_config_value(ftype, raw, key)
    return RunConfig(**values)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(config, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config.to_text())


# --- trace files ---

def _parse_header(line):
    if not line.startswith("#"):
        raise TraceFormatError("line 1: missing '# device_id=... rate_hz=...'"
                               " header")
    meta = {}
    for token in line[1:].split():
        if "=" not in token:
            raise TraceFormatError(f"line 1: bad header token {token!r}")
        k, _, v = token.partition("=")
        meta[k] = v
    if "device_id" not in meta or "rate_hz" not in meta:
        raise TraceFormatError("line 1: header must define device_id and"
                               " rate_hz")
    try:
        rate = float(meta["rate_hz"])
    except ValueError as exc:
        raise TraceFormatError("line 1: rate_hz is not a number") from exc
    return meta["device_id"], rate


def load_trace(path, expected_columns=None):
    """Load and validate a trace file into a DeviceTrace."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3:
        raise TraceFormatError("trace file needs header, column line and"
                               " at least one row")
    device_id, rate_hz = _parse_header(lines[0])
    columns = tuple(lines[1].split(","))
    if columns not in (TRACE_COLUMNS, TRACE_COLUMNS + (REF_COLUMN,)):
        raise TraceFormatError(f"line 2: unexpected columns {columns}")
    if expected_columns is not None and len(columns) != expected_columns:
        raise TraceFormatError(
            f"expected {expected_columns} columns, file has {len(columns)}")
    has_ref = columns[-1] == REF_COLUMN
    ncol = len(columns)

    rows = np.empty((len(lines) - 2, ncol))
    for i, line in enumerate(lines[2:], start=3):
        parts = line.split(",")
        if len(parts) != ncol:
            raise TraceFormatError(
                f"line {i}: expected {ncol} fields, got {len(parts)}")
        try:
            row = [float(p) for p in parts]
        except ValueError as exc:
            raise TraceFormatError(f"line {i}: malformed number") from exc
        if not all(np.isfinite(row)):
            raise TraceFormatError(f"line {i}: non-finite field")
        rows[i - 3] = row

    t = rows[:, 0]
    dup = np.flatnonzero(np.diff(t) == 0)
    if dup.size:
        raise TraceFormatError(f"line {dup[0] + 4}: duplicate timestamp")
    if np.any(np.diff(t) < 0):
        bad = int(np.flatnonzero(np.diff(t) < 0)[0])
        raise TraceFormatError(f"line {bad + 4}: non-monotonic timestamp")

    ref = np.radians(rows[:, 10]) if has_ref else None
    return DeviceTrace(device_id=device_id, rate_hz=rate_hz, t=t,
                       acc=rows[:, 1:4], gyro=rows[:, 4:7],
                       mag=rows[:, 7:10], ref_heading=ref)


def trace_to_text(trace):
    cols = TRACE_COLUMNS + ((REF_COLUMN,) if trace.ref_heading is not None
                            else ())
    out = [f"# device_id={trace.device_id} rate_hz={trace.rate_hz!r}",
           ",".join(cols)]
    ref_deg = (np.degrees(trace.ref_heading)
               if trace.ref_heading is not None else None)
    for i in range(len(trace)):
        parts = [f"{trace.t[i]:.9f}"]
        for block in (trace.acc, trace.gyro, trace.mag):
            parts.extend(repr(float(v)) for v in block[i])
        if ref_deg is not None:
            parts.append(repr(float(ref_deg[i])))
        out.append(",".join(parts))
    return "\n".join(out) + "\n"


def write_trace(trace, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(trace_to_text(trace))


def resample(trace, target_hz):
    """Resample a trace onto a uniform grid by linear interpolation.

    The grid starts at the first timestamp and spans the full duration
    (inclusive endpoint grid: floor(duration * hz) + 1 samples).
    Resampling a uniform trace at its native rate is the identity.
    """
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    if target_hz > trace.rate_hz + 1e-9:
        raise ValueError("target_hz exceeds native rate")
    if len(trace) == 0:
        raise ValueError("empty trace")
    if trace.is_uniform() and abs(target_hz - trace.rate_hz) < 1e-12:
        return trace

    t0 = trace.t[0]
    n = int(np.floor(trace.duration * target_hz + 1e-9)) + 1
    t_new = t0 + np.arange(n) / target_hz

    def interp_block(block):
        return np.column_stack([np.interp(t_new, trace.t, block[:, k])
                                for k in range(block.shape[1])])

    ref = None
    if trace.ref_heading is not None:
        ref = interp_circular(t_new, trace.t, trace.ref_heading)
    return DeviceTrace(device_id=trace.device_id, rate_hz=target_hz,
                       t=t_new, acc=interp_block(trace.acc),
                       gyro=interp_block(trace.gyro),
                       mag=interp_block(trace.mag), ref_heading=ref)


def interp_to_grid(trace, t_new, rate_hz):
    """Linearly interpolate a trace onto an externally supplied grid.

    Unlike resample this may upsample; mixed-rate fusion uses it to put
    a low-rate device onto the 20 Hz grid of the full-rate one.
    """
    t_new = np.asarray(t_new, dtype=float)

    def interp_block(block):
        return np.column_stack([np.interp(t_new, trace.t, block[:, k])
                                for k in range(block.shape[1])])

    ref = None
    if trace.ref_heading is not None:
        ref = interp_circular(t_new, trace.t, trace.ref_heading)
    return DeviceTrace(device_id=trace.device_id, rate_hz=rate_hz,
                       t=t_new, acc=interp_block(trace.acc),
                       gyro=interp_block(trace.gyro),
                       mag=interp_block(trace.mag), ref_heading=ref)


# --- pipeline output formats ---

def write_track(track, path):
    """Track rows: t,x_m,y_m."""
    lines = ["t,x_m,y_m"]
    lines += [f"{track.t[k]:.9f},{float(track.xy[k, 0])!r},"
              f"{float(track.xy[k, 1])!r}" for k in range(len(track))]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_track(path):
    from .displacement import Track
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "t,x_m,y_m":
        raise TraceFormatError("bad track file header")
    rows = np.array([[float(p) for p in line.split(",")]
                     for line in lines[1:]])
    return Track(t=rows[:, 0], xy=rows[:, 1:3])


def write_strides(strides, path):
    """Stride rows: peak_time,i,j,prominence."""
    lines = ["peak_time,i,j,prominence"]
    lines += [f"{ev.peak_time:.9f},{ev.span[0]},{ev.span[1]},"
              f"{float(ev.prominence)!r}" for ev in strides]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_heading_series(series, path):
    """Heading rows: t,heading_deg,method."""
    deg = np.degrees(series.psi)
    lines = ["t,heading_deg,method"]
    lines += [f"{series.t[k]:.9f},{float(deg[k])!r},{series.method}"
              for k in range(len(series))]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_heading_series(path):
    from .heading import HeadingSeries
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "t,heading_deg,method":
        raise TraceFormatError("bad heading file header")
    t, psi, methods = [], [], set()
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 3:
            raise TraceFormatError("bad heading row")
        t.append(float(parts[0]))
        psi.append(wrap_angle(np.radians(float(parts[1]))))
        methods.add(parts[2])
    if len(methods) > 1:
        raise TraceFormatError("mixed methods in heading file")
    return HeadingSeries(t=np.array(t), psi=np.array(psi),
                         method=methods.pop() if methods else "mag")


def format_report(entries):
    """Flat key=value report text; floats via repr for reproducibility."""
    lines = []
    for key, value in entries:
        lines.append(f"{key}={value!r}" if isinstance(value, float)
                     else f"{key}={value}")
    return "\n".join(lines) + "\n"


def write_report(entries, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_report(entries))
