import numpy as np
import pytest

from earnav.datamodel import GRAVITY
from earnav.displacement import (StrideEvent, Track,
                                 critically_damped_lowpass, detect_strides,
                                 integrate_track, kinematics_track,
                                 per_timestamp_distance, stride_length)
from earnav.heading import HeadingSeries


def step_signal(freq=2.0, amp=3.0, dur=10.0, fs=20.0):
    t = np.arange(0, dur, 1.0 / fs)
    return t, GRAVITY + amp * np.sin(2 * np.pi * freq * t)


def test_lowpass_preserves_dc_and_attenuates_high_freq():
    fs = 20.0
    t = np.arange(0, 10, 1 / fs)
    lo = np.sin(2 * np.pi * 0.5 * t)
    hi = np.sin(2 * np.pi * 8.0 * t)
    out_lo = critically_damped_lowpass(5.0 + lo, fs, 3.0)
    out_hi = critically_damped_lowpass(5.0 + hi, fs, 3.0)
    assert np.std(out_lo - 5.0) > 0.9 * np.std(lo)
    assert np.std(out_hi - 5.0) < 0.25 * np.std(hi)
    with pytest.raises(ValueError, match="too low"):
        critically_damped_lowpass(lo, 5.0, 3.0)


def test_detect_strides_counts_20_peaks():
    _, sig = step_signal()
    events = detect_strides(sig, 20.0, 1.0)
    assert len(events) == 20


def test_detect_strides_constant_signal():
    assert detect_strides(np.full(100, GRAVITY), 20.0, 0.8) == []


def test_detect_strides_rejects_small_blip():
    t, sig = step_signal(amp=0.0)
    sig[50] += 0.2  # sub-prominence blip
    assert detect_strides(sig, 20.0, 1.0) == []


def test_detect_strides_spans_tile_series():
    _, sig = step_signal()
    events = detect_strides(sig, 20.0, 1.0)
    assert events[0].span[0] == 0
    assert events[-1].span[1] == sig.size
    for a, b in zip(events, events[1:]):
        assert a.span[1] == b.span[0]


def test_stride_event_validation():
    with pytest.raises(ValueError):
        StrideEvent(peak_time=0.0, span=(5, 5), prominence=1.0)


def test_stride_length_examples():
    assert stride_length(1.80) == pytest.approx(0.774)
    assert stride_length(1.00) == pytest.approx(0.43)


def test_per_timestamp_distance_examples():
    events = [StrideEvent(peak_time=0.25, span=(0, 10), prominence=1.0)]
    d = per_timestamp_distance(events, 10, 0.774)
    assert np.allclose(d, 0.0774)
    assert per_timestamp_distance([], 5, 0.774).sum() == 0.0
    two = [StrideEvent(0.2, (0, 4), 1.0), StrideEvent(0.7, (4, 9), 1.0)]
    d2 = per_timestamp_distance(two, 12, 0.774)
    assert d2.sum() == pytest.approx(2 * 0.774)


def test_per_timestamp_distance_rejects_overlap_and_overrun():
    overlapping = [StrideEvent(0.1, (0, 5), 1.0),
                   StrideEvent(0.2, (4, 8), 1.0)]
    with pytest.raises(ValueError, match="overlapping"):
        per_timestamp_distance(overlapping, 10, 0.774)
    with pytest.raises(ValueError, match="exceeds"):
        per_timestamp_distance([StrideEvent(0.1, (0, 20), 1.0)], 10, 0.774)


def test_integrate_track_straight_lines():
    t = np.arange(10) / 2.0
    east = HeadingSeries(t=t, psi=np.zeros(10), method="mag")
    d = np.full(10, 0.0774)
    track = integrate_track(d, east)
    assert track.final_position.x == pytest.approx(0.774)
    assert track.final_position.y == pytest.approx(0.0, abs=1e-12)
    north = HeadingSeries(t=t, psi=np.full(10, np.pi / 2), method="mag")
    track = integrate_track(d, north)
    assert track.final_position.x == pytest.approx(0.0, abs=1e-12)
    assert track.final_position.y == pytest.approx(0.774)


def test_integrate_track_closed_square():
    # four 10 m legs with exact headings close on the origin
    psi = np.repeat([0.0, np.pi / 2, np.pi, 1.5 * np.pi], 100)
    t = np.arange(psi.size) / 20.0
    series = HeadingSeries(t=t, psi=psi, method="mag")
    d = np.full(psi.size, 0.1)
    track = integrate_track(d, series)
    assert abs(track.final_position.x) < 1e-9
    assert abs(track.final_position.y) < 1e-9


def test_track_validation():
    with pytest.raises(ValueError, match="shape"):
        Track(t=np.arange(3.0), xy=np.zeros((4, 2)))
    with pytest.raises(ValueError, match="non-finite"):
        Track(t=np.arange(2.0), xy=np.array([[0.0, 0.0], [np.nan, 0.0]]))


def test_kinematics_track_closed_forms():
    t = np.arange(0, 10.0001, 0.05)
    zero = kinematics_track(t, np.zeros((t.size, 2)))
    assert np.allclose(zero.xy, 0.0)
    a = 0.2
    const = kinematics_track(t, np.tile([a, 0.0], (t.size, 1)))
    # trapezoid double integration of a constant is exact
    assert const.final_position.x == pytest.approx(0.5 * a * 100.0,
                                                   rel=1e-9)
    # a constant bias produces the classic half-b-T-squared drift
    bias = 0.05
    drifted = kinematics_track(t, np.tile([0.0, bias], (t.size, 1)))
    assert drifted.final_position.y == pytest.approx(0.5 * bias * 100.0,
                                                     rel=1e-9)
