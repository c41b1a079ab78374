import numpy as np
import pytest

from earnav.angles import circular_diff, wrap_angle
from earnav.datamodel import (GRAVITY, DeviceTrace, quat_from_euler_zyx,
                              rot_x, rot_y)
from earnav.heading import (HeadingSeries, complementary_heading,
                            integrate_attitude, integrate_gyro,
                            madgwick_heading, mag_heading,
                            mag_heading_series, tilt_angles)
from earnav.synth import generate, line_scenario, square_loop_scenario


def test_tilt_angles_examples():
    assert tilt_angles([0.0, 0.0, GRAVITY]) == pytest.approx((0.0, 0.0))
    phi, theta = tilt_angles([0.0, GRAVITY * np.sin(np.radians(30)),
                              GRAVITY * np.cos(np.radians(30))])
    assert np.degrees(phi) == pytest.approx(30.0)
    assert theta == pytest.approx(0.0, abs=1e-12)
    phi, theta = tilt_angles([-GRAVITY * np.sin(np.radians(20)), 0.0,
                              GRAVITY * np.cos(np.radians(20))])
    assert phi == pytest.approx(0.0, abs=1e-12)
    assert np.degrees(theta) == pytest.approx(20.0)


def test_tilt_angles_free_fall():
    with pytest.raises(ValueError, match="free-fall"):
        tilt_angles([0.0, 0.0, 0.01])


def test_tilt_angles_recover_random_attitudes():
    rng = np.random.default_rng(0)
    for _ in range(200):
        phi = rng.uniform(-np.pi / 3, np.pi / 3)
        theta = rng.uniform(-np.pi / 3, np.pi / 3)
        tilt_t = (rot_y(theta) @ rot_x(phi)).T
        a_dev = tilt_t @ np.array([0.0, 0.0, GRAVITY])
        got = tilt_angles(a_dev)
        assert got[0] == pytest.approx(phi, abs=1e-9)
        assert got[1] == pytest.approx(theta, abs=1e-9)


def test_mag_heading_flat_examples():
    assert mag_heading([1.0, 0.0, 0.0], (0.0, 0.0)) == pytest.approx(0.0)
    assert mag_heading([0.0, 1.0, 0.0], (0.0, 0.0)) == pytest.approx(
        np.pi / 2)


def test_mag_heading_tilt_invariance():
    # a pitched device with a consistently rotated field reads the same
    # heading as the flat case
    psi = np.radians(40.0)
    flat_m = np.array([np.cos(psi), np.sin(psi), 1.2])
    theta = np.radians(30.0)
    m_dev = (rot_y(theta)).T @ flat_m
    assert mag_heading(m_dev, (0.0, theta)) == pytest.approx(psi, abs=1e-9)


def test_mag_heading_zero_horizontal_field():
    with pytest.raises(ValueError, match="zero horizontal"):
        mag_heading([0.0, 0.0, 1.0], (0.0, 0.0))


def test_mag_heading_series_matches_scalar():
    rng = np.random.default_rng(1)
    n = 50
    t = np.arange(n) / 20.0
    mag = rng.normal(0, 1, (n, 3)) + [2.0, 0, 0]
    tilts = rng.uniform(-0.5, 0.5, (n, 2))
    trace = DeviceTrace(device_id="x", rate_hz=20.0, t=t,
                        acc=np.tile([0, 0, GRAVITY], (n, 1)),
                        gyro=np.zeros((n, 3)), mag=mag)
    series = mag_heading_series(trace, tilts)
    for k in range(0, n, 7):
        assert series.psi[k] == pytest.approx(
            mag_heading(mag[k], tuple(tilts[k])), abs=1e-12)


def test_integrate_gyro_constant_yaw_rate():
    n, rate = 61, 20.0
    t = np.arange(n) / rate
    gyro = np.tile([0.0, 0.0, np.radians(10.0)], (n, 1))
    trace = DeviceTrace(device_id="g", rate_hz=rate, t=t,
                        acc=np.tile([0, 0, GRAVITY], (n, 1)), gyro=gyro,
                        mag=np.tile([1.0, 0, 0], (n, 1)))
    series = integrate_gyro(trace)
    assert np.degrees(series.psi[-1]) == pytest.approx(30.0, abs=1e-9)


def test_integrate_gyro_zero_rates_constant():
    n = 40
    trace = DeviceTrace(device_id="g", rate_hz=20.0, t=np.arange(n) / 20.0,
                        acc=np.tile([0, 0, GRAVITY], (n, 1)),
                        gyro=np.zeros((n, 3)),
                        mag=np.tile([1.0, 0, 0], (n, 1)))
    q0 = quat_from_euler_zyx(1.0, 0.2, -0.1)
    series = integrate_gyro(trace, initial_attitude=q0)
    assert np.allclose(series.psi, series.psi[0])


def test_integrate_attitude_against_fine_reference():
    # random smooth 3-D rates: coarse integration matches a 100x finer
    # reference within 0.1 degree over 60 s
    rng = np.random.default_rng(2)
    rate, dur = 20.0, 60.0
    freqs = rng.uniform(0.05, 0.3, (3,))
    amps = rng.uniform(-0.5, 0.5, (3,))

    def rates(ts):
        return np.column_stack([a * np.sin(2 * np.pi * f * ts)
                                for a, f in zip(amps, freqs)])

    t = np.arange(int(dur * rate) + 1) / rate
    t_fine = np.arange(int(dur * rate * 100) + 1) / (rate * 100)
    q0 = np.array([1.0, 0.0, 0.0, 0.0])
    coarse = integrate_attitude(t, rates(t), q0)
    fine = integrate_attitude(t_fine, rates(t_fine), q0)
    dot = abs(np.dot(coarse[-1], fine[-1]))
    angle_deg = np.degrees(2 * np.arccos(min(dot, 1.0)))
    assert angle_deg < 0.1


def test_integrate_attitude_rejects_non_uniform():
    t = np.array([0.0, 0.05, 0.2])
    with pytest.raises(ValueError, match="non-uniform"):
        integrate_attitude(t, np.zeros((3, 3)), [1.0, 0, 0, 0])


def make_pair(t, gyro_deg, mag_deg):
    n = t.size
    gyro = HeadingSeries(t=t, psi=np.full(n, np.radians(gyro_deg)),
                         method="gyro")
    mag = HeadingSeries(t=t, psi=np.full(n, np.radians(mag_deg)),
                        method="mag")
    return gyro, mag


def test_complementary_point_checks():
    t = np.array([0.0, 240.0, 320.0, 400.0])
    gyro, mag = make_pair(t, 10.0, 20.0)
    out = complementary_heading(gyro, mag)
    assert np.degrees(out.psi[0]) == pytest.approx(12.0, abs=1e-9)
    assert np.degrees(out.psi[1]) == pytest.approx(18.0, abs=1e-9)
    # clamped to pure magnetometer from 320 s on
    assert out.psi[2] == mag.psi[2]
    assert out.psi[3] == mag.psi[3]


def test_complementary_shortest_arc_across_zero():
    t = np.array([0.0])
    gyro, mag = make_pair(t, 350.0, 10.0)
    out = complementary_heading(gyro, mag)
    assert np.degrees(out.psi[0]) == pytest.approx(354.0, abs=1e-9)


def test_complementary_clamps_weight_above_one():
    t = np.array([0.0])
    gyro, mag = make_pair(t, 10.0, 20.0)
    out = complementary_heading(gyro, mag, alpha0=1.5)
    assert np.degrees(out.psi[0]) == pytest.approx(10.0, abs=1e-9)


def test_complementary_requires_aligned_series():
    g, _ = make_pair(np.array([0.0, 1.0]), 0.0, 0.0)
    _, m = make_pair(np.array([0.0, 2.0]), 0.0, 0.0)
    with pytest.raises(ValueError, match="time grid"):
        complementary_heading(g, m)


def test_madgwick_converges_on_static_flat_trace():
    n = 200  # 10 s at 20 Hz
    t = np.arange(n) / 20.0
    trace = DeviceTrace(device_id="m", rate_hz=20.0, t=t,
                        acc=np.tile([0, 0, GRAVITY], (n, 1)),
                        gyro=np.zeros((n, 3)),
                        mag=np.tile([1.0, 0.0, 1.2], (n, 1)))
    out = madgwick_heading(trace, gain=0.5)
    final = np.degrees(circular_diff(out.psi[-1], 0.0))
    assert abs(final) < 1.0
    # converged well before the end
    mid = np.degrees(circular_diff(out.psi[n // 2], 0.0))
    assert abs(mid) < 1.0


def test_madgwick_tracks_noiseless_walk():
    out = generate(line_scenario(distance=20.0, lead_in_s=5.0,
                                 phone_noise_deg=0.0))
    series = madgwick_heading(out.left, gain=0.5)
    settled = series.t >= 5.0
    errs = np.degrees(circular_diff(series.psi[settled],
                                    out.truth_heading[settled]))
    assert np.sqrt(np.mean(errs ** 2)) < 3.0


def test_gyro_bias_grows_heading_error_linearly():
    bias = np.radians(1.0)
    sc = square_loop_scenario(gyro_bias=(0.0, 0.0, bias),
                              phone_noise_deg=0.0)
    out = generate(sc)
    series = integrate_gyro(out.left)
    err = circular_diff(series.psi, out.truth_heading)
    # error at the end approximates bias * duration
    expect = bias * out.left.t[-1]
    assert err[-1] == pytest.approx(expect, rel=0.05)
