import numpy as np
import pytest

from smoothcurate.core import derive_speed_signal
from smoothcurate.errors import DomainError, SegmentTooShort
from smoothcurate.spectral import sal, sal_for_trajectory
from smoothcurate.synth import (
    HESITATION,
    JITTER,
    TREMOR,
    NoiseSpec,
    SynthConfig,
    inject_noise,
    min_jerk_path,
    min_jerk_segment,
    synth_dataset,
    synth_trajectory,
)
from smoothcurate.alignment import ted


def test_segment_boundaries():
    seg = min_jerk_segment([0, 1, 2], [3, 1, -1], 1.5, 0.01)
    np.testing.assert_allclose(seg[0], [0, 1, 2])
    np.testing.assert_allclose(seg[-1], [3, 1, -1])


def test_segment_peak_speed(oracles):
    dt, T = 1e-4, 2.0
    seg = min_jerk_segment([0, 0, 0], [0.6, 0.8, 0], T, dt)
    v = np.linalg.norm(np.diff(seg, axis=0), axis=1) / dt
    assert v.max() == pytest.approx(oracles["min_jerk"]["peak_factor"] * 1.0 / T, rel=1e-6)


def test_segment_constant_when_endpoints_equal():
    seg = min_jerk_segment([1, 2, 3], [1, 2, 3], 1.0, 0.1)
    assert np.all(seg == [1, 2, 3])


def test_segment_endpoint_derivatives_vanish(oracles):
    dt, T = 1e-4, 1.0
    x = min_jerk_segment([0, 0, 0], [1, 0, 0], T, dt)[:, 0]
    peak_v = oracles["min_jerk"]["peak_factor"]
    vel = np.gradient(x, dt)
    acc = np.gradient(vel, dt)
    assert abs(vel[0]) < 1e-6 * peak_v and abs(vel[-1]) < 1e-6 * peak_v
    assert abs(acc[0]) / np.abs(acc).max() < 1e-3 and abs(acc[-1]) / np.abs(acc).max() < 1e-3
    assert oracles["min_jerk"]["end_velocity"] == [0.0, 0.0]
    assert oracles["min_jerk"]["end_acceleration"] == [0.0, 0.0]


def test_segment_too_short():
    with pytest.raises(SegmentTooShort):
        min_jerk_segment([0, 0, 0], [1, 0, 0], 0.05, 0.05)


def test_contact_toggles_make_phases():
    _, _, grip = min_jerk_path(SynthConfig().waypoints, (2, 2, 2), 0.05, None, (1, 2))
    changes = np.flatnonzero(np.diff(grip.astype(int)))
    assert len(changes) == 2


def test_amplitude_zero_is_identity():
    pos, quats, _ = min_jerk_path(SynthConfig().waypoints, (2, 2, 2), 0.05)
    for kind, freq in ((JITTER, None), (TREMOR, 3.0), (HESITATION, None)):
        p, q = inject_noise(pos, quats, NoiseSpec(kind, 0.0, freq), 0.05)
        np.testing.assert_array_equal(p, pos)
        np.testing.assert_array_equal(q, quats)


def test_noise_preserves_length():
    cfg = SynthConfig()
    for spec in (NoiseSpec(JITTER, 0.01), NoiseSpec(TREMOR, 0.01, 6.0), NoiseSpec(HESITATION, 0.9),
                 NoiseSpec(JITTER, 0.05, target="orientation")):
        t = synth_trajectory(cfg, [spec], np.random.default_rng(0))
        clean = synth_trajectory(cfg, [], np.random.default_rng(0))
        assert t.length == clean.length and t.dt == clean.dt


def test_jitter_lowers_sal_over_seeds():
    cfg = SynthConfig(waypoints=((0, 0, 0), (0.5, 0.2, 0.1)), durations=(6.0,), contact_toggles=())
    for seed in range(20):
        clean = synth_trajectory(cfg, [], np.random.default_rng(seed))
        noisy = synth_trajectory(cfg, [NoiseSpec(JITTER, 0.02)], np.random.default_rng(seed))
        assert sal_for_trajectory(noisy) < sal_for_trajectory(clean)


def test_tremor_spectral_peak():
    cfg = SynthConfig(waypoints=((0, 0, 0), (0.5, 0.2, 0.1)), durations=(12.8,), contact_toggles=(), dt=0.05)
    pos, quats, _ = min_jerk_path(cfg.waypoints, cfg.durations, cfg.dt)
    p, _ = inject_noise(pos, quats, NoiseSpec(TREMOR, 0.02, 6.0, seed=3), cfg.dt)
    delta = (p - pos)
    x = delta[:, np.argmax(np.abs(delta).max(axis=0))]
    spec = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(len(x), cfg.dt)
    assert freqs[np.argmax(spec)] == pytest.approx(6.0, abs=freqs[1])


def test_frequency_above_nyquist():
    pos, quats, _ = min_jerk_path(SynthConfig().waypoints, (2, 2, 2), 0.05)
    with pytest.raises(DomainError):
        inject_noise(pos, quats, NoiseSpec(TREMOR, 0.01, 11.0), 0.05)


def test_single_level_labels():
    ds = synth_dataset(SynthConfig(), 4, [NoiseSpec(JITTER, 0.01)], seed=0)
    assert len(ds) == 4
    assert len({t.metadata["label"] for t in ds}) == 1


def test_dataset_deterministic():
    a = synth_dataset(SynthConfig(), 2, seed=5)
    b = synth_dataset(SynthConfig(), 2, seed=5)
    for x, y in zip(a, b):
        assert x.id == y.id and x.metadata == y.metadata
        np.testing.assert_array_equal(x.arms[0].positions, y.arms[0].positions)
        np.testing.assert_array_equal(x.arms[0].orientations, y.arms[0].orientations)


def test_default_levels_order_metrics():
    ds = synth_dataset(SynthConfig(), 4, seed=0)
    by_level = {}
    for t in ds:
        by_level.setdefault(int(t.metadata["quality_level"]), []).append(t)
    sal_means = [np.mean([sal_for_trajectory(t) for t in by_level[k]]) for k in range(3)]
    ted_means = [np.mean([ted(t) for t in by_level[k]]) for k in range(3)]
    assert sal_means[0] > sal_means[1] > sal_means[2]
    assert ted_means[0] < ted_means[1] < ted_means[2]


def test_bimanual_generation():
    t = synth_trajectory(SynthConfig(arms=2), [], np.random.default_rng(0))
    assert len(t.arms) == 2
    assert not np.allclose(t.arms[0].positions, t.arms[1].positions)
    assert len(derive_speed_signal(t.arms[1], t.dt)) == t.length - 1
