"""Contact-aware smoothed reference trajectories.

A trajectory is cut into contact phases (maximal runs of constant gripper
state). Each phase is split into dense boundary regions and a sparse interior,
and every region gets its own low-degree Bezier envelope whose control polygon
is a subset of the raw samples. The envelope is refined greedily by inserting
the worst-fit sample, and a recursive corridor subdivision is tried as a
fallback. Orientations are smoothed separately with windowed Karcher means
that never cross a phase boundary.

Samples are placed on the curve by their time coordinate: the control point
taken from sample ``j`` carries time ``j / (n - 1)`` and sample ``i`` is
matched to the curve point whose time coordinate is ``i / (n - 1)``. With
uniformly spaced control indices this is exactly ``B(i / (n - 1))``; with
irregular ones it keeps the linear precision of Bezier curves, so a
constant-velocity segment is reproduced exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb

from .core import ArmTrack, canonicalize, quat_conj, quat_exp, quat_log, quat_mul
from .errors import DomainError, EmptyInput, RegionTooShort

DENSE = "dense"
SPARSE = "sparse"


@dataclass(frozen=True)
class TedConfig:
    r: float = 0.2
    eps_dense: float = 0.10
    eps_sparse: float = 0.05
    k0_dense: int = 10
    k0_sparse: int = 12
    m_ref: int = 20
    area_budget: float | None = None  # None: half the region's corridor width
    eps_num: float = 1e-9
    karcher_halfwidth: int = 4
    w_ori: float = 0.25
    boundary_blend: float = 0.0
    dtw_radius: int = 1

    def __post_init__(self):
        if not 0 < self.r < 0.5:
            raise ValueError("r must lie in (0, 0.5)")
        if self.eps_dense <= 0 or self.eps_sparse <= 0:
            raise ValueError("corridor widths must be positive")
        if self.k0_dense < 2 or self.k0_sparse < 2:
            raise ValueError("initial control-point counts must be >= 2")
        if self.m_ref < 1:
            raise ValueError("m_ref must be >= 1")
        if not 0.0 <= self.boundary_blend <= 1.0:
            raise ValueError("boundary_blend must lie in [0, 1]")
        if self.karcher_halfwidth < 0 or self.dtw_radius < 0:
            raise ValueError("window sizes must be non-negative")

    def budget_for(self, eps: float) -> float:
        return eps / 2.0 if self.area_budget is None else self.area_budget


@dataclass(frozen=True)
class Region:
    start: int
    end: int  # inclusive
    kind: str
    phase: int
    contact: bool

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class RegionPartition:
    regions: tuple

    def phase_bounds(self) -> list[tuple[int, int]]:
        bounds: dict[int, list[int]] = {}
        for reg in self.regions:
            lo_hi = bounds.setdefault(reg.phase, [reg.start, reg.end])
            lo_hi[0] = min(lo_hi[0], reg.start)
            lo_hi[1] = max(lo_hi[1], reg.end)
        return [tuple(bounds[p]) for p in sorted(bounds)]

    @property
    def length(self) -> int:
        return self.regions[-1].end + 1 if self.regions else 0


@dataclass
class IterationRecord:
    iteration: int
    n_control: int
    area: float
    penalty: float
    score: float
    best_score: float


@dataclass
class RegionFit:
    """Envelope samples for one region plus fitting metadata."""

    samples: np.ndarray
    control_indices: list
    s_best: float
    iterations: int
    fallback_used: bool
    history: list = field(default_factory=list)
    fallback_splits: list = field(default_factory=list)
    inserted: list = field(default_factory=list)

    @property
    def n_control(self) -> int:
        return len(self.control_indices)


@dataclass
class EnvelopeResult:
    positions: np.ndarray
    orientations: np.ndarray
    partition: RegionPartition
    fits: list  # one RegionFit per region, in region order

    def residuals(self, raw_positions) -> np.ndarray:
        return np.linalg.norm(np.asarray(raw_positions) - self.positions, axis=1)


# --------------------------------------------------------------------------
# partition


def partition_phases(gripper, r: float = 0.2) -> RegionPartition:
    contact = np.asarray(gripper).astype(bool)
    n_total = len(contact)
    if n_total == 0:
        raise EmptyInput("empty contact sequence")
    change = np.flatnonzero(contact[1:] != contact[:-1]) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change - 1, [n_total - 1]])
    regions = []
    for phase, (s, e) in enumerate(zip(starts.tolist(), ends.tolist())):
        n = e - s + 1
        state = bool(contact[s])
        edge = max(1, math.floor(r * n))
        if n <= 2 * edge:
            regions.append(Region(s, e, DENSE, phase, state))
            continue
        regions.append(Region(s, s + edge - 1, DENSE, phase, state))
        regions.append(Region(s + edge, e - edge, SPARSE, phase, state))
        regions.append(Region(e - edge + 1, e, DENSE, phase, state))
    return RegionPartition(tuple(regions))


# --------------------------------------------------------------------------
# Bezier curves


def bezier_eval(control_points, t):
    """Evaluate a Bezier curve by de Casteljau's algorithm.

    ``t`` may be a scalar (returns one point) or an array of parameters
    (returns one point per parameter).
    """
    pts = np.asarray(control_points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) < 2:
        raise ValueError("need at least 2 control points")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > 1.0) or not np.all(np.isfinite(t_arr)):
        raise DomainError("curve parameter must lie in [0, 1]")
    tt = np.atleast_1d(t_arr)[None, :, None]
    work = np.repeat(pts[:, None, :], tt.shape[1], axis=1)
    for _ in range(len(pts) - 1):
        work = (1.0 - tt) * work[:-1] + tt * work[1:]
    out = work[0]
    return out[0] if t_arr.ndim == 0 else out


def _bernstein(degree: int, t: np.ndarray) -> np.ndarray:
    k = np.arange(degree + 1)
    t = t[:, None]
    return comb(degree, k) * t**k * (1.0 - t) ** (degree - k)


def _match_parameters(ctrl_time: np.ndarray, targets: np.ndarray, tol=1e-14, max_iter=100):
    """Solve ``u(t) = target`` where ``u`` is the Bezier curve of control times.

    Control times are strictly increasing, so ``u`` is strictly monotone and
    a bracketed Newton iteration converges for every target.
    """
    degree = len(ctrl_time) - 1
    if degree == 1:
        return targets.copy()
    du = np.diff(ctrl_time) * degree
    t = targets.copy()
    lo = np.zeros_like(t)
    hi = np.ones_like(t)
    active = np.arange(len(t))
    for _ in range(max_iter):
        ta = t[active]
        f = _bernstein(degree, ta) @ ctrl_time - targets[active]
        done = np.abs(f) <= tol
        if done.all():
            break
        active, ta, f = active[~done], ta[~done], f[~done]
        hi[active] = np.where(f > 0, ta, hi[active])
        lo[active] = np.where(f <= 0, ta, lo[active])
        slope = _bernstein(degree - 1, ta) @ du
        with np.errstate(divide="ignore", invalid="ignore"):
            step = ta - f / slope
        ok = (step >= lo[active]) & (step <= hi[active]) & np.isfinite(step)
        t[active] = np.where(ok, step, 0.5 * (lo[active] + hi[active]))
    return t


def _fit_samples(points: np.ndarray, indices) -> np.ndarray:
    """Envelope samples for ``points`` with control polygon ``points[indices]``."""
    n = len(points)
    idx = np.asarray(indices, dtype=int)
    targets = np.arange(n) / (n - 1)
    t = _match_parameters(idx / (n - 1), targets)
    t[0], t[-1] = 0.0, 1.0
    return _bernstein(len(idx) - 1, t) @ points[idx]


def uniform_indices(n: int, k0: int) -> list[int]:
    """``k0`` evenly spread sample indices in ``[0, n-1]``, endpoints included."""
    if n < 2:
        raise RegionTooShort(f"region of length {n}")
    k = min(k0, n)
    return np.unique(np.round(np.linspace(0, n - 1, k)).astype(int)).tolist()


def _score(d: np.ndarray, eps: float) -> tuple[float, float]:
    n = len(d)
    area = float(d.sum() / (n - 1))
    over = np.maximum(0.0, d - eps)
    return area, float(np.sum(over * over))


def corridor_fallback(points, eps: float, budget: float, k0: int = 10):
    """Recursive argmax-split subdivision until every piece fits its corridor.

    Each piece is a single Bezier with up to ``k0`` evenly indexed control
    points (endpoints included). A piece is accepted when its largest residual
    is within ``eps`` and its mean residual within ``budget``; otherwise it is
    split at its worst sample, which becomes a shared endpoint of both halves.

    Returns ``(samples, split_indices)`` with splits in the order made.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n < 2:
        raise RegionTooShort(f"region of length {n}")
    max_depth = math.ceil(math.log2(n)) if n > 1 else 0
    out = np.empty_like(pts)
    splits: list[int] = []

    def recurse(lo: int, hi: int, depth: int):
        seg = pts[lo : hi + 1]
        m = len(seg)
        fit = _fit_samples(seg, uniform_indices(m, k0))
        d = np.linalg.norm(seg - fit, axis=1)
        j = int(np.argmax(d))
        ok = d[j] <= eps and d.sum() / (m - 1) <= budget
        if ok or m <= 2 or depth >= max_depth or j in (0, m - 1):
            out[lo : hi + 1] = fit
            return
        splits.append(lo + j)
        recurse(lo, lo + j, depth + 1)
        recurse(lo + j, hi, depth + 1)

    recurse(0, n - 1, 0)
    return out, splits


def greedy_envelope(points, eps: float, cfg: TedConfig = TedConfig(), initial_indices=None,
                    budget: float | None = None) -> RegionFit:
    """Greedy Bezier envelope with corridor fallback for one region.

    The control polygon starts at ``initial_indices`` and grows by the sample
    with the largest residual, keeping the best envelope seen under the
    score ``mean residual + squared corridor excess``. Refinement stops when
    the envelope is inside its budget and corridor, when the worst residual
    drops to the refinement threshold (equal to the budget), when the worst
    sample is already a control point, or after ``cfg.m_ref`` fits.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n < 2:
        raise RegionTooShort(f"region of length {n}")
    if initial_indices is None:
        initial_indices = uniform_indices(n, 2)
    ctrl = sorted(set(int(i) for i in initial_indices))
    if ctrl[0] != 0 or ctrl[-1] != n - 1:
        raise ValueError("initial indices must include both endpoints")
    area_limit = cfg.budget_for(eps) if budget is None else budget
    stop_residual = area_limit

    best = None
    best_ctrl: list[int] = ctrl
    s_best = math.inf
    history: list[IterationRecord] = []
    inserted: list[int] = []
    for m in range(1, cfg.m_ref + 1):
        fit = _fit_samples(pts, ctrl)
        d = np.linalg.norm(pts - fit, axis=1)
        area, penalty = _score(d, eps)
        score = area + penalty
        if score < s_best:
            best, best_ctrl, s_best = fit, list(ctrl), score
        history.append(IterationRecord(m, len(ctrl), area, penalty, score, s_best))
        if area <= area_limit and penalty <= cfg.eps_num:
            break
        j = int(np.argmax(d))
        if d[j] <= stop_residual:
            break
        if j in ctrl:
            # set union would leave the polygon unchanged and repeat this fit
            break
        ctrl = sorted(ctrl + [j])
        inserted.append(j)

    corr, splits = corridor_fallback(pts, eps, area_limit, k0=len(initial_indices))
    d_corr = np.linalg.norm(pts - corr, axis=1)
    area_c, pen_c = _score(d_corr, eps)
    corr_score = area_c + pen_c
    if corr_score < s_best:
        return RegionFit(corr, best_ctrl, corr_score, len(history), True, history, splits, inserted)
    return RegionFit(best, best_ctrl, s_best, len(history), False, history, splits, inserted)


# --------------------------------------------------------------------------
# orientations


def _karcher_batch(quats: np.ndarray, mask: np.ndarray, tol=1e-9, max_iter=100) -> np.ndarray:
    """Karcher means of ``quats[b, mask[b]]`` for every batch row ``b``.

    Starts at ``quats[:, 0]``, which must be a valid entry of every row.
    """
    mu = canonicalize(quats[:, 0])
    weights = mask.astype(float)
    counts = weights.sum(axis=1, keepdims=True)
    for _ in range(max_iter):
        rel = quat_mul(quat_conj(mu)[:, None, :], quats)
        step = (quat_log(rel) * weights[..., None]).sum(axis=1) / counts
        mu = canonicalize(quat_mul(mu, quat_exp(step)))
        if np.max(np.linalg.norm(step, axis=1)) < tol:
            break
    return mu


def karcher_mean(quats) -> np.ndarray:
    """Geodesic (Karcher) mean of unit quaternions."""
    q = np.asarray(quats, dtype=float)
    if q.ndim == 1:
        q = q[None]
    if len(q) == 0:
        raise EmptyInput("no quaternions to average")
    return _karcher_batch(q[None], np.ones((1, len(q)), dtype=bool))[0]


def smooth_orientations(quats, halfwidth: int, partition: RegionPartition) -> np.ndarray:
    """Centred sliding-window Karcher mean, windows clipped to their phase."""
    q = canonicalize(np.asarray(quats, dtype=float))
    T = len(q)
    if T != partition.length:
        raise ValueError(f"{T} orientations for a partition of length {partition.length}")
    if halfwidth == 0:
        return q.copy()
    lo = np.empty(T, dtype=int)
    hi = np.empty(T, dtype=int)
    for s, e in partition.phase_bounds():
        t = np.arange(s, e + 1)
        lo[s : e + 1] = np.maximum(t - halfwidth, s)
        hi[s : e + 1] = np.minimum(t + halfwidth, e)
    offsets = np.arange(2 * halfwidth + 1)
    idx = lo[:, None] + offsets[None, :]
    mask = idx <= hi[:, None]
    idx = np.where(mask, idx, lo[:, None])
    return _karcher_batch(q[idx], mask)


# --------------------------------------------------------------------------
# full reference


def build_reference(arm: ArmTrack, dt: float, cfg: TedConfig = TedConfig()) -> EnvelopeResult:
    """Smoothed reference for one arm; ``dt`` is accepted for interface symmetry."""
    raw = np.asarray(arm.positions, dtype=float)
    T = len(raw)
    if T < 2:
        raise RegionTooShort(f"trajectory of length {T}")
    partition = partition_phases(arm.gripper, cfg.r)
    out = np.empty_like(raw)
    fits = []
    for reg in partition.regions:
        pts = raw[reg.start : reg.end + 1]
        if reg.length == 1:
            fit = RegionFit(pts.copy(), [0], 0.0, 0, False)
        else:
            eps, k0 = (cfg.eps_dense, cfg.k0_dense) if reg.kind == DENSE else (cfg.eps_sparse, cfg.k0_sparse)
            fit = greedy_envelope(pts, eps, cfg, uniform_indices(reg.length, k0))
        samples = fit.samples
        if reg.kind == DENSE and cfg.boundary_blend > 0.0:
            beta = cfg.boundary_blend
            samples = (1.0 - beta) * samples + beta * pts
        out[reg.start : reg.end + 1] = samples
        fits.append(fit)
    orientations = smooth_orientations(arm.orientations, cfg.karcher_halfwidth, partition)
    return EnvelopeResult(out, orientations, partition, fits)
