import numpy as np
import pytest

from earnav.calibration import (AccelCalib, AccelCalibrator,
                                CalibrationError, calibrate_gyro, clip_means,
                                fit_accel_calibration, levenberg_marquardt,
                                mag_add_reference_point, mag_check_rollover,
                                MagCalibState, stationary_windows)
from earnav.datamodel import GRAVITY


def random_orientations(n, rng):
    vs = rng.normal(size=(n, 3))
    return vs / np.linalg.norm(vs, axis=1, keepdims=True) * GRAVITY


def make_clips(calib, n=12, seed=0, samples=5):
    rng = np.random.default_rng(seed)
    return [np.tile(calib.unapply(v), (samples, 1))
            for v in random_orientations(n, rng)]


def test_apply_examples():
    ident = AccelCalib.identity()
    assert np.allclose(ident.apply([0.0, 0.0, 9.81]), [0.0, 0.0, 9.81])
    bias = AccelCalib(bias=(0.1, 0.0, 0.0))
    assert np.allclose(bias.apply([0.1, 0.0, 9.81]), [0.0, 0.0, 9.81])
    sf = AccelCalib(sf=(2.0, 1.0, 1.0))
    assert np.allclose(sf.apply([1.0, 0.0, 0.0]), [2.0, 0.0, 0.0])


def test_apply_unapply_inverse():
    calib = AccelCalib(alpha_yx=0.03, alpha_zx=-0.01, alpha_zy=0.02,
                       sf=(1.1, 0.9, 1.05), bias=(0.2, -0.1, 0.3))
    rng = np.random.default_rng(1)
    a = rng.normal(0, 5, (40, 3))
    assert np.allclose(calib.apply(calib.unapply(a)), a, atol=1e-12)


def test_fit_identity_fixed_point():
    clips = make_clips(AccelCalib.identity())
    fit, rms = fit_accel_calibration(clips)
    assert rms < 1e-9
    assert np.allclose(fit.params(), AccelCalib.identity().params(),
                       atol=1e-6)


def test_fit_recovers_injected_parameters():
    true = AccelCalib(alpha_yx=0.01, sf=(1.02, 0.98, 1.01),
                      bias=(0.05, -0.03, 0.02))
    fit, rms = fit_accel_calibration(make_clips(true))
    assert rms < 1e-6
    rel = np.abs(fit.params() - true.params()) / np.maximum(
        np.abs(true.params()), 1e-3)
    assert np.max(rel) < 1e-3


def test_fit_rejects_too_few_orientations():
    clips = make_clips(AccelCalib.identity(), n=3)
    with pytest.raises(ValueError, match="insufficient orientations"):
        fit_accel_calibration(clips)


def test_fit_rejects_repeated_orientations():
    # 12 clips but only one distinct direction
    clip = np.tile([0.0, 0.0, GRAVITY], (5, 1))
    with pytest.raises(ValueError, match="insufficient orientations"):
        fit_accel_calibration([clip] * 12)


def test_clip_means_rejects_moving_clip():
    rng = np.random.default_rng(2)
    moving = rng.normal(0, 3, (50, 3))
    with pytest.raises(ValueError, match="not near-static"):
        clip_means([moving])


def test_estimator_interface():
    true = AccelCalib(sf=(1.05, 0.95, 1.0), bias=(0.1, 0.0, -0.1))
    X = np.array([true.unapply(v) for v in
                  random_orientations(12, np.random.default_rng(3))])
    est = AccelCalibrator().fit(X)
    assert est.n_iter_ >= 1
    assert np.allclose(np.linalg.norm(est.transform(X), axis=1), GRAVITY,
                       atol=1e-6)
    params = est.get_params()
    assert params["max_iter"] == 200 and params["gtol"] == 1e-10
    with pytest.raises(Exception):
        AccelCalibrator().transform(X)  # not fitted


def test_lm_on_quadratic_bowl():
    target = np.array([1.0, -2.0, 3.0])

    def residual(p):
        return p - target

    p, rms, n_iter = levenberg_marquardt(residual, np.zeros(3))
    assert np.allclose(p, target, atol=1e-8)
    assert rms < 1e-8


def test_lm_nonconvergence_raises():
    def residual(p):
        return np.array([np.sin(50.0 * p[0]) + 2.0])

    with pytest.raises(CalibrationError, match="did not converge"):
        levenberg_marquardt(residual, np.array([0.3]), max_iter=2,
                            gtol=1e-300)


def test_stationary_windows():
    t = np.arange(100) / 20.0
    acc = np.tile([0.0, 0.0, GRAVITY], (100, 1))
    acc[40:60, 2] += 2.0  # motion burst in the middle
    windows = stationary_windows(t, acc, tol=0.3, min_duration=1.0)
    assert windows == [(0, 40), (60, 100)]


def test_calibrate_gyro_static_offset():
    t = np.arange(40) / 20.0
    acc = np.tile([0.0, 0.0, GRAVITY], (40, 1))
    gyro_psi = np.zeros(40)
    mag_psi = np.full(40, np.radians(30.0))
    cal = calibrate_gyro(t, acc, gyro_psi, mag_psi)
    assert cal.heading_offset == pytest.approx(np.radians(30.0))
    cal2 = calibrate_gyro(t, acc, mag_psi, mag_psi)
    assert cal2.heading_offset == pytest.approx(0.0, abs=1e-12)


def test_calibrate_gyro_requires_stationary_window():
    t = np.arange(40) / 20.0
    acc = np.tile([0.0, 0.0, GRAVITY + 5.0], (40, 1))
    with pytest.raises(ValueError, match="no stationary window"):
        calibrate_gyro(t, acc, np.zeros(40), np.zeros(40))


def test_mag_window_single_point():
    st = mag_add_reference_point(MagCalibState(), 0.0, np.radians(90.0),
                                 np.radians(80.0))
    assert len(st.window) == 1
    assert st.current_offset == pytest.approx(np.radians(10.0))


def test_mag_window_eviction_at_cap():
    st = MagCalibState()
    for k in range(16):
        st = mag_add_reference_point(st, 15.0 * k, np.radians(5.0), 0.0)
    assert len(st.window) == 15
    assert st.window[0][0] == 15.0  # the t=0 point was evicted


def test_mag_window_drops_sub_period_points():
    st = mag_add_reference_point(MagCalibState(), 0.0, 0.1, 0.0)
    st = mag_add_reference_point(st, 5.0, 0.9, 0.0)
    assert len(st.window) == 1
    assert st.dropped == 1
    assert st.current_offset == pytest.approx(0.1)


def test_mag_window_circular_offset_mean():
    st = MagCalibState()
    st = mag_add_reference_point(st, 0.0, np.radians(359.0), 0.0)
    st = mag_add_reference_point(st, 15.0, np.radians(1.0), 0.0)
    assert st.current_offset == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("prev,new,reset", [
    (358.0, 1.0, True),
    (1.0, 358.0, True),
    (10.0, 20.0, False),
])
def test_mag_rollover(prev, new, reset):
    st = MagCalibState()
    for k in range(3):
        st = mag_add_reference_point(st, 15.0 * k, 0.2 * k, 0.0)
    out = mag_check_rollover(st, np.radians(prev), np.radians(new))
    if reset:
        assert out.window == st.window[-1:]
        assert out.current_offset == pytest.approx(st.window[-1][1])
    else:
        assert out == st


def test_mag_offset_error_shrinks_with_window_size():
    # averaging noisy reference points: the full window beats a single
    # point in estimating a constant offset
    rng = np.random.default_rng(4)
    true_offset = np.radians(12.0)
    errs = {1: [], 15: []}
    for _ in range(200):
        for cap in (1, 15):
            st = MagCalibState(cap=cap)
            for k in range(15):
                phone = true_offset + rng.normal(0.0, np.radians(3.0))
                st = mag_add_reference_point(st, 15.0 * k, phone, 0.0)
            errs[cap].append(abs(st.current_offset - true_offset))
    assert np.mean(errs[15]) < np.mean(errs[1])
