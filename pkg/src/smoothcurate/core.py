"""Trajectory domain types, rotation helpers and speed extraction.

Quaternions are stored as ``(w, x, y, z)`` arrays and every helper here is
vectorised over leading axes, so ``q`` may be shaped ``(4,)`` or ``(..., 4)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidRotation, InvalidTrajectory

UNIT_TOL = 1e-6
GRIPPER_THRESHOLD = 0.5


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def canonicalize(q):
    """Flip quaternions so that ``w >= 0`` (q and -q are the same rotation)."""
    q = np.asarray(q, dtype=float)
    sign = np.where(q[..., :1] < 0, -1.0, 1.0)
    return q * sign


def quat_conj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_mul(a, b):
    """Hamilton product ``a * b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def _check_unit(q, what="quaternion"):
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 4:
        raise InvalidRotation(f"{what} must have 4 components, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise InvalidRotation(f"{what} has non-finite components")
    norm = np.linalg.norm(q, axis=-1)
    if np.any(np.abs(norm - 1.0) > UNIT_TOL):
        raise InvalidRotation(f"{what} is not unit-norm (|q| = {np.max(norm):.9g})")
    return q


def geodesic_angle(q1, q2):
    """Rotation angle in ``[0, pi]`` between two unit quaternions.

    Uses ``4 * atan2(|a - b|, |a + b|)`` after sign alignment, which stays
    accurate for nearly identical rotations where ``arccos`` loses precision.
    """
    a = _check_unit(q1)
    b = _check_unit(q2)
    return _geodesic_unchecked(a, b)


def _geodesic_unchecked(a, b):
    dot = np.sum(a * b, axis=-1, keepdims=True)
    b = np.where(dot < 0, -b, b)
    diff = np.linalg.norm(a - b, axis=-1)
    summ = np.linalg.norm(a + b, axis=-1)
    return 4.0 * np.arctan2(diff, summ)


def quat_log(q):
    """Rotation vector (axis * angle) of unit quaternions, canonical branch."""
    q = canonicalize(q)
    w = q[..., 0]
    v = q[..., 1:]
    n = np.linalg.norm(v, axis=-1)
    safe_n = np.where(n > 1e-12, n, 1.0)
    scale = np.where(n > 1e-12, 2.0 * np.arctan2(n, w) / safe_n, 2.0 / np.maximum(w, 1e-300))
    return v * scale[..., None]


def quat_exp(r):
    """Unit quaternion for rotation vectors ``r`` (inverse of :func:`quat_log`)."""
    r = np.asarray(r, dtype=float)
    angle = np.linalg.norm(r, axis=-1)
    # sin(a/2)/a written through sinc to stay finite at a = 0
    s = 0.5 * np.sinc(angle / (2.0 * np.pi))
    q = np.concatenate([np.cos(angle / 2.0)[..., None], r * s[..., None]], axis=-1)
    return canonicalize(q)


def to_rotation_vector(q):
    q = _check_unit(q)
    return quat_log(q)


def from_rotation_vector(r):
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise InvalidRotation("rotation vector has non-finite components")
    return quat_exp(r)


def slerp(q0, q1, t):
    """Spherical interpolation along the shorter arc."""
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if np.dot(q0, q1) < 0:
        q1 = -q1
    rel = quat_log(quat_mul(quat_conj(q0), q1))
    t = np.asarray(t, dtype=float)
    return canonicalize(quat_mul(q0, quat_exp(t[..., None] * rel)))


def axis_angle_quat(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return canonicalize(np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis]))


@dataclass(frozen=True)
class ArmTrack:
    """Per-arm end-effector track.

    ``gripper`` accepts booleans or continuous values; the latter are
    thresholded at 0.5. Quaternions are sign-canonicalised to ``w >= 0``.
    """

    positions: np.ndarray
    orientations: np.ndarray
    gripper: np.ndarray
    velocities: np.ndarray | None = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        quats = canonicalize(np.array(self.orientations, dtype=float))
        grip = np.asarray(self.gripper)
        if grip.dtype != bool:
            grip = np.asarray(grip, dtype=float) > GRIPPER_THRESHOLD
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "orientations", _frozen(quats))
        object.__setattr__(self, "gripper", _frozen(np.array(grip, dtype=bool)))
        if self.velocities is not None:
            object.__setattr__(self, "velocities", _frozen(np.array(self.velocities, dtype=float)))

    def __len__(self):
        return len(self.positions)

    def translated(self, offset) -> "ArmTrack":
        return ArmTrack(self.positions + np.asarray(offset, dtype=float), self.orientations,
                        self.gripper, self.velocities)


@dataclass(frozen=True)
class Trajectory:
    id: str
    dt: float
    arms: tuple
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def length(self) -> int:
        return len(self.arms[0]) if self.arms else 0


@dataclass(frozen=True)
class SpeedSignal:
    values: np.ndarray
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.array(self.values, dtype=float)))
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self):
        return len(self.values)


def derive_speed_signal(arm: ArmTrack, dt: float, speed_source: str = "auto") -> SpeedSignal:
    """Scalar speed series for one arm.

    ``speed_source`` is ``"recorded"`` (require stored velocities),
    ``"differenced"`` (forward differences of positions, length ``T - 1``) or
    ``"auto"`` (recorded when available).
    """
    if len(arm) < 2:
        raise InvalidTrajectory("need at least 2 samples to derive a speed signal")
    if not np.all(np.isfinite(arm.positions)):
        raise InvalidTrajectory("non-finite positions")
    use_recorded = speed_source == "recorded" or (speed_source == "auto" and arm.velocities is not None)
    if use_recorded:
        if arm.velocities is None:
            raise InvalidTrajectory("speed_source='recorded' but the track has no velocities")
        if not np.all(np.isfinite(arm.velocities)):
            raise InvalidTrajectory("non-finite velocities")
        return SpeedSignal(np.linalg.norm(arm.velocities, axis=1), dt)
    if speed_source not in ("auto", "differenced"):
        raise ValueError(f"unknown speed_source {speed_source!r}")
    steps = np.diff(arm.positions, axis=0)
    return SpeedSignal(np.linalg.norm(steps, axis=1) / dt, dt)


def validate_trajectory(traj: Trajectory) -> list[str]:
    """Return every invariant violation as a message; empty means valid."""
    problems = []
    if not np.isfinite(traj.dt) or traj.dt <= 0:
        problems.append(f"non-positive dt: {traj.dt!r}")
    if len(traj.arms) == 0:
        problems.append("trajectory has no arms")
        return problems
    lengths = [len(arm.positions) for arm in traj.arms]
    if len(set(lengths)) > 1:
        problems.append(f"length mismatch across arms: {lengths}")
    for k, arm in enumerate(traj.arms):
        tag = f"arm {k}"
        T = len(arm.positions)
        if T < 2:
            problems.append(f"{tag}: length {T} < 2")
        if arm.positions.ndim != 2 or arm.positions.shape[1:] != (3,):
            problems.append(f"{tag}: positions must be shaped (T, 3), got {arm.positions.shape}")
        elif not np.all(np.isfinite(arm.positions)):
            problems.append(f"{tag}: non-finite positions")
        q = arm.orientations
        if q.ndim != 2 or q.shape[1:] != (4,):
            problems.append(f"{tag}: orientations must be shaped (T, 4), got {q.shape}")
        else:
            if len(q) != T:
                problems.append(f"{tag}: length mismatch, {len(q)} orientations vs {T} positions")
            if not np.all(np.isfinite(q)):
                problems.append(f"{tag}: non-finite orientations")
            else:
                bad = np.flatnonzero(np.abs(np.linalg.norm(q, axis=1) - 1.0) > UNIT_TOL)
                if len(bad):
                    problems.append(f"{tag}: non-unit quaternion at indices {bad[:5].tolist()}")
        if len(arm.gripper) != T:
            problems.append(f"{tag}: length mismatch, {len(arm.gripper)} gripper samples vs {T} positions")
        if arm.velocities is not None:
            v = arm.velocities
            if v.ndim != 2 or v.shape != (T, 3):
                problems.append(f"{tag}: velocities must be shaped ({T}, 3), got {v.shape}")
            elif not np.all(np.isfinite(v)):
                problems.append(f"{tag}: non-finite velocities")
    return problems


def make_trajectory(id: str, dt: float, arms: Sequence[ArmTrack], **metadata) -> Trajectory:
    return Trajectory(id=id, dt=dt, arms=tuple(arms), metadata={k: str(v) for k, v in metadata.items()})
