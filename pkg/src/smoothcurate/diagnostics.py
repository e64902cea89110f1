"""Noise-floor diagnostics for behaviour-cloning datasets.

The irreducible part of the squared-error loss is the expected trace of the
conditional action covariance. These helpers estimate it from data and
evaluate the closed-form relations built on it: the clean/noisy mixture
floor, the quadratic compounding bound, chunk amplification and the
quality-versus-quantity trade-off.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, ShapeError


@dataclass(frozen=True)
class StateActionSet:
    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.states, dtype=float)
        a = np.asarray(self.actions, dtype=float)
        s = s[:, None] if s.ndim == 1 else s
        a = a[:, None] if a.ndim == 1 else a
        if len(s) != len(a):
            raise ShapeError(f"{len(s)} states vs {len(a)} actions")
        if len(s) < 2:
            raise ShapeError("need at least 2 state-action pairs")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(a))):
            raise ValueError("non-finite entries in state-action data")
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "actions", a)

    def __len__(self):
        return len(self.states)


def conditional_action_variance(data: StateActionSet, knn_k: int = 8, ddof: int = 1) -> float:
    """k-NN estimate of ``E_s[tr Var[a | s]]``.

    Each sample's neighbourhood is its ``knn_k`` nearest states (itself
    included) under per-dimension standardisation. ``ddof=1`` keeps the
    estimate unbiased for small neighbourhoods; with ``ddof=0`` it shrinks by
    ``(knn_k - 1) / knn_k``. If every state is identical the whole set is one
    neighbourhood.
    """
    m = len(data)
    if not 2 <= knn_k < m:
        raise ValueError(f"need 2 <= knn_k < m, got knn_k={knn_k}, m={m}")
    s, a = data.states, data.actions
    std = s.std(axis=0)
    if not np.any(std > 0):
        return float(np.sum(a.var(axis=0, ddof=ddof)))
    z = (s - s.mean(axis=0)) / np.where(std > 0, std, 1.0)
    _, idx = cKDTree(z).query(z, k=knn_k)
    neigh = a[idx]  # (m, k, d_a)
    return float(np.mean(np.sum(neigh.var(axis=1, ddof=ddof), axis=1)))


def mixture_noise_floor(alpha: float, sigma_c2: float, sigma_n2: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha={alpha} outside [0, 1]")
    if sigma_c2 < 0 or sigma_n2 < 0:
        raise DomainError("variances must be non-negative")
    return alpha * sigma_c2 + (1.0 - alpha) * sigma_n2


def regret_bound(H: float, epsilon: float) -> float:
    if H < 1 or epsilon < 0:
        raise DomainError("need H >= 1 and epsilon >= 0")
    return H * H * epsilon


def chunk_noise_floor(chunk_horizon: int, sigma_step2: float) -> float:
    if chunk_horizon < 1:
        raise DomainError("chunk horizon must be >= 1")
    return chunk_horizon * sigma_step2


def chunk_variance_ratio(chunk_horizon: int, n_chunks: int = 100_000, d_a: int = 1,
                         sigma: float = 1.0, seed: int = 0) -> float:
    """Monte-Carlo ``tr Cov(chunk) / tr Cov(step)`` under stationary per-step noise."""
    rng = np.random.default_rng(seed)
    steps = rng.normal(scale=sigma, size=(n_chunks, chunk_horizon, d_a))
    chunk_trace = np.sum(steps.reshape(n_chunks, -1).var(axis=0))
    step_trace = np.sum(steps[:, 0, :].var(axis=0))
    return float(chunk_trace / step_trace)


@dataclass(frozen=True)
class QualityQuantityInput:
    noise_floor_curve: Sequence[float] | Callable[[int], float]
    complexity: float
    capacity: float
    demo_length: float
    n_total: int | None = None

    def floor_values(self) -> np.ndarray:
        if callable(self.noise_floor_curve):
            if self.n_total is None:
                raise ValueError("n_total is required with a callable noise-floor curve")
            vals = np.array([self.noise_floor_curve(k) for k in range(1, self.n_total + 1)], dtype=float)
        else:
            vals = np.asarray(self.noise_floor_curve, dtype=float)
        if vals.ndim != 1 or len(vals) == 0:
            raise ShapeError("noise-floor curve must be a non-empty 1-D sequence over k = 1..N")
        if np.any(vals < 0):
            raise ValueError("noise-floor values must be non-negative")
        return vals


def quality_quantity_curve(inp: QualityQuantityInput) -> tuple[np.ndarray, int]:
    """``E(k) = floor(k) + C d / (k T)`` for ``k = 1..N`` and its smallest argmin."""
    floor = inp.floor_values()
    k = np.arange(1, len(floor) + 1, dtype=float)
    curve = floor + inp.capacity * inp.complexity / (k * inp.demo_length)
    return curve, int(np.argmin(curve)) + 1


def state_action_from_trajectories(trajectories) -> StateActionSet:
    """States are stacked arm positions; actions the next-step displacements."""
    states, actions = [], []
    for traj in trajectories:
        pos = np.hstack([arm.positions for arm in traj.arms])
        states.append(pos[:-1])
        actions.append(np.diff(pos, axis=0))
    return StateActionSet(np.vstack(states), np.vstack(actions))
