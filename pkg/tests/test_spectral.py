import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from conftest import line_arm, traj_of
from smoothcurate.core import ArmTrack, SpeedSignal, derive_speed_signal
from smoothcurate.errors import SignalTooShort
from smoothcurate.spectral import SalConfig, one_sided_spectrum, sal, sal_for_trajectory
from smoothcurate.synth import band_limited_noise

EPS = 1e-5


def sal_direct(v, dt, eps=EPS):
    """Explicit DFT sum and arc length, no FFT."""
    v = np.asarray(v, dtype=float)
    T = len(v)
    total = 0.0
    prev = None
    for k in range(T // 2 + 1):
        re = sum(v[t] * math.cos(2 * math.pi * k * t / T) for t in range(T))
        im = sum(v[t] * math.sin(2 * math.pi * k * t / T) for t in range(T))
        point = (k / (T * dt), math.log(math.hypot(re, im) + eps))
        if prev is not None:
            total += math.dist(point, prev)
        prev = point
    return -total


def test_zero_signal_flat_spectrum(oracles):
    spec = one_sided_spectrum(SpeedSignal(np.zeros(64), 0.05))
    assert len(spec.freqs) == 33
    np.testing.assert_array_equal(spec.log_amps, np.full(33, math.log(EPS)))
    assert abs(sal(SpeedSignal(np.zeros(64), 0.05)) - oracles["sal_zero"]["value"]) < 1e-12


def test_constant_signal_dc_only():
    c, T = 2.5, 64
    spec = one_sided_spectrum(SpeedSignal(np.full(T, c), 0.1))
    assert math.exp(spec.log_amps[0]) - EPS == pytest.approx(c * T)
    assert np.all(np.exp(spec.log_amps[1:]) - EPS < 1e-9)


def test_bin_aligned_sinusoid():
    T, dt, k0 = 64, 0.05, 5
    v = 1.0 + np.sin(2 * np.pi * k0 * np.arange(T) / T)
    spec = one_sided_spectrum(SpeedSignal(v, dt))
    assert np.argmax(spec.log_amps[1:]) + 1 == k0
    assert spec.freqs[k0] == pytest.approx(k0 / (T * dt))


def test_matches_direct_evaluation():
    rng = np.random.default_rng(2)
    for T in (16, 33, 64):
        v = np.abs(rng.normal(size=T))
        assert sal(SpeedSignal(v, 0.02)) == pytest.approx(sal_direct(v, 0.02), abs=1e-9)


def test_low_frequency_smoother_than_high():
    T, dt = 256, 0.05
    t = np.arange(T) * dt
    low = 1 + 0.1 * np.sin(2 * np.pi * 1 * t)
    high = 1 + 0.1 * np.sin(2 * np.pi * 8 * t)
    s_low, s_high = sal(SpeedSignal(low, dt)), sal(SpeedSignal(high, dt))
    assert s_low > s_high
    assert s_low == pytest.approx(sal_direct(low, dt), abs=1e-9)
    assert s_high == pytest.approx(sal_direct(high, dt), abs=1e-9)


def min_jerk_speed(T):
    tau = np.linspace(0.0, 1.0, T)
    return 30 * tau**2 - 60 * tau**3 + 30 * tau**4


def test_jitter_lowers_sal():
    v = min_jerk_speed(200)
    noisy = np.abs(v + 0.05 * band_limited_noise(200, np.random.default_rng(0), 1)[:, 0])
    assert sal(SpeedSignal(v, 0.05)) > sal(SpeedSignal(noisy, 0.05))


def test_monotone_noise_sensitivity():
    # offset keeps the speed positive; the base has no wrap-around discontinuity
    v = 1.0 + min_jerk_speed(200)
    for seed in range(20):
        noise = band_limited_noise(200, np.random.default_rng(seed), 1)[:, 0]
        scores = [sal(SpeedSignal(v + a * noise, 0.05)) for a in (0.01, 0.02, 0.05)]
        assert spearmanr([0.01, 0.02, 0.05], scores).statistic == pytest.approx(-1.0)


def test_scale_change_bounded_by_regulariser():
    # scaling by c shifts each log-amplitude by about eps * |1 - 1/c| / |V_k|;
    # the arc length moves by at most twice the sum of those shifts
    rng = np.random.default_rng(4)
    for _ in range(10):
        v = 2.0 + rng.uniform(0.5, 1.0) * min_jerk_speed(128) + 0.3 * rng.normal(size=128)
        base = SpeedSignal(v, 0.05)
        mags = np.exp(one_sided_spectrum(base).log_amps) - EPS
        for c in (0.5, 2.0):
            bound = 2 * np.sum(EPS * abs(1 - 1 / c) / mags)
            assert abs(sal(SpeedSignal(c * v, 0.05)) - sal(base)) <= bound


def test_scale_invariance_as_regulariser_vanishes():
    v = SpeedSignal(1.0 + min_jerk_speed(128) + 0.1 * np.random.default_rng(0).normal(size=128), 0.05)
    gaps = []
    for eps in (1e-5, 1e-8, 1e-11):
        cfg = SalConfig(epsilon=eps)
        gaps.append(abs(sal(SpeedSignal(2 * v.values, v.dt), cfg) - sal(v, cfg)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-9


def test_short_signal_rejected():
    with pytest.raises(SignalTooShort):
        sal(SpeedSignal([1.0, 2.0, 3.0], 0.1))


def test_trajectory_mean_over_arms():
    a = line_arm(50, end=(1, 0, 0))
    wobble = a.positions + 0.01 * np.sin(np.arange(50))[:, None]
    b = ArmTrack(wobble, a.orientations, a.gripper)
    s_a = sal(derive_speed_signal(a, 0.05))
    s_b = sal(derive_speed_signal(b, 0.05))
    assert sal_for_trajectory(traj_of(a)) == s_a
    assert sal_for_trajectory(traj_of(a, a)) == pytest.approx(s_a, abs=1e-15)
    assert sal_for_trajectory(traj_of(a, b)) == pytest.approx((s_a + s_b) / 2)


def test_config_validation_and_determinism():
    with pytest.raises(ValueError):
        SalConfig(epsilon=0)
    v = SpeedSignal(np.abs(np.random.default_rng(0).normal(size=100)), 0.01)
    assert sal(v) == sal(v)
