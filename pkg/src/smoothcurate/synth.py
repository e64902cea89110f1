"""Synthetic demonstrations with known quality.

Clean motion is a chain of minimum-jerk segments between waypoints, with
orientations slerped between keyframes on the same time profile. Quality is
degraded by seeded perturbations: band-limited jitter, a tremor sinusoid, or
a hesitation (local time warp that nearly stops the motion).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import ArmTrack, Trajectory, canonicalize, quat_exp, quat_mul, slerp
from .errors import DomainError, SegmentTooShort

JITTER = "high_freq_jitter"
TREMOR = "tremor_sinusoid"
HESITATION = "hesitation_pause"
NOISE_KINDS = (JITTER, TREMOR, HESITATION)


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    amplitude: float
    frequency: float | None = None  # Hz, periodic kinds only
    seed: int = 0
    target: str = "position"  # or "orientation"
    width: float = 0.5  # seconds, hesitation window

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.kind == TREMOR and not (self.frequency and self.frequency > 0):
            raise ValueError("tremor needs a positive frequency")
        if self.target not in ("position", "orientation"):
            raise ValueError(f"unknown noise target {self.target!r}")

    @property
    def label(self) -> str:
        if self.amplitude == 0:
            return "clean"
        return f"{self.kind}:{self.amplitude:g}"


@dataclass(frozen=True)
class SynthConfig:
    waypoints: tuple = ((0.0, 0.0, 0.0), (0.30, 0.10, 0.20), (0.50, -0.10, 0.10), (0.60, 0.20, 0.30))
    durations: tuple = (2.0, 2.0, 2.0)
    dt: float = 0.05
    contact_toggles: tuple = (1, 2)
    orientation_keyframes: tuple | None = None
    noise: tuple = ()
    arms: int = 1
    waypoint_jitter: float = 0.02  # per-demo random offset of interior waypoints (m)

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("need at least 2 waypoints")
        if len(self.durations) != len(self.waypoints) - 1:
            raise ValueError("need one duration per segment")
        if any(d <= 0 for d in self.durations):
            raise ValueError("durations must be positive")
        if self.orientation_keyframes is not None and len(self.orientation_keyframes) != len(self.waypoints):
            raise ValueError("need one orientation keyframe per waypoint")


def min_jerk_profile(tau):
    """Normalised minimum-jerk progress ``10 tau^3 - 15 tau^4 + 6 tau^5``."""
    tau = np.asarray(tau, dtype=float)
    return tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)


def _segment_times(T: float, dt: float) -> np.ndarray:
    n = int(round(T / dt))
    return np.arange(n + 1) * dt


def min_jerk_segment(x0, xf, T: float, dt: float) -> np.ndarray:
    """Positions sampled at ``0, dt, ..., T`` along a minimum-jerk segment."""
    if T < 2 * dt:
        raise SegmentTooShort(f"duration {T} shorter than two samples of {dt}")
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)
    t = _segment_times(T, dt)
    s = min_jerk_profile(t / t[-1])
    return x0 + (xf - x0) * s[:, None]


def _default_keyframes(n: int) -> np.ndarray:
    # gentle yaw/pitch changes between waypoints
    keys = []
    for k in range(n):
        ang = 0.25 * k
        axis = np.array([0.2, 0.3, 1.0])
        keys.append(canonicalize(np.concatenate([[np.cos(ang / 2)], np.sin(ang / 2) * axis / np.linalg.norm(axis)])))
    return np.array(keys)


def min_jerk_path(waypoints, durations, dt, keyframes=None, contact_toggles=()):
    """Concatenate segments; returns ``(positions, quaternions, gripper)``."""
    waypoints = np.asarray(waypoints, dtype=float)
    keys = _default_keyframes(len(waypoints)) if keyframes is None else canonicalize(np.asarray(keyframes, float))
    pos_parts, quat_parts = [], []
    for k, T in enumerate(durations):
        seg = min_jerk_segment(waypoints[k], waypoints[k + 1], T, dt)
        t = _segment_times(T, dt)
        s = min_jerk_profile(t / t[-1])
        q = slerp(keys[k], keys[k + 1], s)
        if k > 0:
            seg, q = seg[1:], q[1:]
        pos_parts.append(seg)
        quat_parts.append(q)
    positions = np.concatenate(pos_parts)
    quats = np.concatenate(quat_parts)
    # sample index at which each waypoint is reached
    reach = np.concatenate([[0], np.cumsum([int(round(T / dt)) for T in durations])])
    gripper = np.zeros(len(positions), dtype=bool)
    for w in sorted(contact_toggles):
        gripper[reach[w]:] = ~gripper[reach[w]:]
    return positions, quats, gripper


def band_limited_noise(n: int, rng: np.random.Generator, dims: int = 3) -> np.ndarray:
    """Unit-RMS noise with no energy below half the Nyquist frequency."""
    bins = n // 2 + 1
    k_min = int(np.ceil(n / 4))
    out = np.empty((n, dims))
    for d in range(dims):
        coef = np.zeros(bins, dtype=complex)
        phases = rng.uniform(0.0, 2 * np.pi, bins - k_min)
        coef[k_min:] = np.exp(1j * phases)
        x = np.fft.irfft(coef, n=n)
        rms = np.sqrt(np.mean(x * x))
        out[:, d] = x / rms if rms > 0 else x
    return out


def _hesitation_warp(n: int, dt: float, spec: NoiseSpec, rng) -> np.ndarray:
    """Warped sample times: progress slows to ``1 - amplitude`` inside a window."""
    t = np.arange(n) * dt
    half = spec.width / 2.0
    span = t[-1]
    center = rng.uniform(min(half, span / 2), max(span - half, span / 2))
    u = np.clip((t - center) / half, -1.0, 1.0)
    bump = 0.5 * (1.0 + np.cos(np.pi * u))
    rate = np.maximum(1.0 - min(spec.amplitude, 0.98) * bump, 0.02)
    prog = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]))])
    return prog / prog[-1] * span


def inject_noise(positions, orientations, spec: NoiseSpec, dt: float):
    """Return perturbed copies of ``(positions, orientations)``."""
    pos = np.array(positions, dtype=float)
    quats = np.array(orientations, dtype=float)
    n = len(pos)
    nyquist = 1.0 / (2.0 * dt)
    if spec.frequency is not None and spec.frequency > nyquist:
        raise DomainError(f"frequency {spec.frequency} Hz above Nyquist {nyquist} Hz")
    if spec.amplitude == 0:
        return pos, quats
    rng = np.random.default_rng(spec.seed)
    if spec.kind == HESITATION:
        t = np.arange(n) * dt
        warped = _hesitation_warp(n, dt, spec, rng)
        new_pos = np.stack([np.interp(warped, t, pos[:, d]) for d in range(3)], axis=1)
        idx = np.clip(np.searchsorted(t, warped, side="right") - 1, 0, n - 2)
        frac = np.clip((warped - t[idx]) / dt, 0.0, 1.0)
        new_q = np.array([slerp(quats[i], quats[i + 1], f) for i, f in zip(idx, frac)])
        return new_pos, new_q
    if spec.kind == JITTER:
        delta = spec.amplitude * band_limited_noise(n, rng)
    else:
        t = np.arange(n) * dt
        travel = pos[-1] - pos[0]
        direction = rng.normal(size=3)
        if np.linalg.norm(travel) > 1e-12:
            unit = travel / np.linalg.norm(travel)
            direction -= direction.dot(unit) * unit
        direction /= np.linalg.norm(direction)
        phase = rng.uniform(0, 2 * np.pi)
        delta = spec.amplitude * np.sin(2 * np.pi * spec.frequency * t + phase)[:, None] * direction
    if spec.target == "position":
        return pos + delta, quats
    return pos, canonicalize(quat_mul(quats, quat_exp(delta)))


def synth_trajectory(cfg: SynthConfig, noise=(), rng=None, traj_id="synth", **metadata) -> Trajectory:
    rng = rng or np.random.default_rng(0)
    arms = []
    for arm_k in range(cfg.arms):
        wps = np.array(cfg.waypoints, dtype=float) + np.array([0.0, 0.4 * arm_k, 0.0])
        if cfg.waypoint_jitter > 0 and len(wps) > 2:
            wps[1:-1] += rng.normal(scale=cfg.waypoint_jitter, size=wps[1:-1].shape)
        pos, quats, grip = min_jerk_path(wps, cfg.durations, cfg.dt, cfg.orientation_keyframes,
                                         cfg.contact_toggles)
        for spec in tuple(cfg.noise) + tuple(noise):
            spec = replace(spec, seed=int(rng.integers(2**31)))
            pos, quats = inject_noise(pos, quats, spec, cfg.dt)
        arms.append(ArmTrack(pos, quats, grip))
    return Trajectory(traj_id, cfg.dt, tuple(arms), {k: str(v) for k, v in metadata.items()})


# Graded tremor: SAL saturates under broadband jitter (any jitter well above
# the spectral regulariser looks alike), so severity ladders use a tremor peak.
DEFAULT_QUALITY_LEVELS = (
    NoiseSpec(TREMOR, 0.0, 6.0),
    NoiseSpec(TREMOR, 0.01, 6.0),
    NoiseSpec(TREMOR, 0.05, 6.0),
)


def synth_dataset(cfg: SynthConfig, count: int, quality_levels=DEFAULT_QUALITY_LEVELS,
                  seed: int = 0) -> list[Trajectory]:
    """``count`` trajectories per quality level, deterministic in ``seed``.

    Each level is a :class:`NoiseSpec` (or a sequence of them). Trajectories
    carry ``quality_level`` (index into ``quality_levels``) and ``label`` in
    their metadata. The generator for demo ``i`` is seeded from ``(seed, i)``
    and shared across levels, so demo ``i`` has the same base path and noise
    pattern at every level and only the amplitudes differ.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    out = []
    for level, specs in enumerate(quality_levels):
        specs = (specs,) if isinstance(specs, NoiseSpec) else tuple(specs)
        label = "+".join(s.label for s in specs) or "clean"
        for i in range(count):
            rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
            out.append(
                synth_trajectory(cfg, specs, rng, f"q{level}_{i:04d}",
                                 quality_level=level, label=label, seed=seed)
            )
    return out
