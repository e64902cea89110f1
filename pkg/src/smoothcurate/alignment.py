"""Dynamic time warping (exact and FastDTW) and the trajectory-envelope distance."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Trajectory, _geodesic_unchecked, canonicalize, quat_log
from .envelope import EnvelopeResult, TedConfig, build_reference
from .errors import EmptyInput


@dataclass(frozen=True)
class AlignmentPath:
    pairs: list
    total_cost: float

    def __len__(self):
        return len(self.pairs)

    @property
    def normalized_cost(self) -> float:
        return self.total_cost / len(self.pairs)


class PairCost:
    """Elementwise cost between two stacks of samples.

    Subclasses implement ``__call__(a, b)`` broadcasting over leading axes and
    ``coarsen(x)``, the pairwise averaging used by FastDTW's resolution pyramid.
    """

    def __call__(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def coarsen(self, x: np.ndarray) -> np.ndarray:
        n = len(x)
        head = x[: n - n % 2].reshape(n // 2, 2, *x.shape[1:]).mean(axis=1)
        return np.concatenate([head, x[n - n % 2 :]]) if n % 2 else head


class EuclideanCost(PairCost):
    def __call__(self, a, b):
        diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        return np.sqrt(np.sum(diff * diff, axis=-1))


class PoseCost(PairCost):
    """``sqrt(|x - x'|^2 + w_ori^2 * theta(R, R')^2)`` on ``(pos, quat)`` rows.

    Samples are 7-vectors: position followed by a ``(w, x, y, z)`` quaternion.
    """

    def __init__(self, w_ori: float = 0.25):
        self.w_ori = float(w_ori)

    def __call__(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        dx = a[..., :3] - b[..., :3]
        theta = _geodesic_unchecked(a[..., 3:], b[..., 3:])
        return np.sqrt(np.sum(dx * dx, axis=-1) + (self.w_ori * theta) ** 2)

    def coarsen(self, x):
        n = len(x)
        m = n - n % 2
        pos = x[:m, :3].reshape(-1, 2, 3).mean(axis=1)
        q = x[:m, 3:].reshape(-1, 2, 4)
        second = np.where(np.sum(q[:, 0] * q[:, 1], axis=1, keepdims=True) < 0, -q[:, 1], q[:, 1])
        # the normalised sum of two aligned unit quaternions is their geodesic midpoint
        mid = q[:, 0] + second
        mid = canonicalize(mid / np.linalg.norm(mid, axis=1, keepdims=True))
        head = np.hstack([pos, mid])
        return np.concatenate([head, x[m:]]) if n % 2 else head


def pose_samples(positions, orientations) -> np.ndarray:
    return np.hstack([np.asarray(positions, dtype=float), np.asarray(orientations, dtype=float)])


def six_d(positions, orientations) -> np.ndarray:
    """``[x, r]`` rows with ``r`` the rotation vector (export/plotting form)."""
    return np.hstack([np.asarray(positions, dtype=float), quat_log(orientations)])


def _as_samples(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        raise EmptyInput("empty sequence")
    return x[:, None] if x.ndim == 1 else x


def _traceback(D_get, n: int, m: int) -> list:
    i, j = n - 1, m - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, up, left = D_get(i - 1, j - 1), D_get(i - 1, j), D_get(i, j - 1)
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return path


def dtw_exact(A, B, cost: PairCost | None = None) -> AlignmentPath:
    """Full ``O(T*S)`` dynamic program; ties prefer the diagonal step."""
    A = _as_samples(A)
    B = _as_samples(B)
    cost = cost or EuclideanCost()
    n, m = len(A), len(B)
    C = cost(A[:, None], B[None, :]).tolist()
    inf = math.inf
    D = [[inf] * m for _ in range(n)]
    for i in range(n):
        Ci, Di = C[i], D[i]
        Dp = D[i - 1] if i else None
        for j in range(m):
            if i == 0 and j == 0:
                best = 0.0
            elif i == 0:
                best = Di[j - 1]
            elif j == 0:
                best = Dp[j]
            else:
                best = min(Dp[j - 1], Dp[j], Di[j - 1])
            Di[j] = Ci[j] + best
    path = _traceback(lambda i, j: D[i][j], n, m)
    return AlignmentPath(path, D[n - 1][m - 1])


def _windowed_dp(A, B, cost: PairCost, lo: np.ndarray, hi: np.ndarray) -> AlignmentPath:
    n, m = len(A), len(B)
    counts = hi - lo + 1
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    rows = np.repeat(np.arange(n), counts)
    cols = lo[rows] + (np.arange(counts.sum()) - starts[rows])
    flat = cost(A[rows], B[cols]).tolist()
    lo_l, hi_l, st_l = lo.tolist(), hi.tolist(), starts.tolist()
    inf = math.inf
    # row 0 starts at column 0 and only accumulates leftwards
    row = []
    acc = 0.0
    for c in flat[: hi_l[0] + 1]:
        acc += c
        row.append(acc)
    D: list[list[float]] = [row]
    prev, plo, phi = row, lo_l[0], hi_l[0]
    for i in range(1, n):
        a, b, s = lo_l[i], hi_l[i], st_l[i]
        # pad the previous row with inf so columns j - 1 and j exist for every j in [a, b]
        pad = max(0, plo - a + 1)
        padded = [inf] * pad + prev + [inf] * max(0, b - phi)
        off = pad - plo - 1  # padded[j + off] is column j - 1, padded[j + off + 1] is column j
        row = []
        left = inf
        for j in range(a, b + 1):
            diag = padded[j + off]
            up = padded[j + off + 1]
            best = diag if diag <= up else up
            if left < best:
                best = left
            left = flat[s + j - a] + best
            row.append(left)
        D.append(row)
        prev, plo, phi = row, a, b

    def get(i, j):
        a = lo_l[i]
        return D[i][j - a] if a <= j <= hi_l[i] else inf

    path = _traceback(get, n, m)
    return AlignmentPath(path, get(n - 1, m - 1))


def _expand_window(path, n: int, m: int, radius: int):
    """Project a coarse path to per-row column ranges at double resolution."""
    p = np.asarray(path, dtype=int)
    offs = np.arange(-radius, radius + 1)
    ci = (p[:, 0][:, None] + offs[None, :]).ravel()
    cj = np.repeat(p[:, 1], len(offs))
    col_lo = np.clip(2 * (cj - radius), 0, m - 1)
    col_hi = np.clip(2 * (cj + radius) + 1, 0, m - 1)
    lo = np.full(n, m, dtype=int)
    hi = np.full(n, -1, dtype=int)
    for sub in (0, 1):
        r = 2 * ci + sub
        keep = (r >= 0) & (r < n)
        np.minimum.at(lo, r[keep], col_lo[keep])
        np.maximum.at(hi, r[keep], col_hi[keep])
    return lo, hi


def fastdtw(A, B, cost: PairCost | None = None, radius: int = 1) -> AlignmentPath:
    """Multi-resolution approximate DTW (coarsen, solve, project, refine)."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    A = _as_samples(A)
    B = _as_samples(B)
    cost = cost or EuclideanCost()
    n, m = len(A), len(B)
    min_size = radius + 2
    if n < min_size or m < min_size:
        return _windowed_dp(A, B, cost, np.zeros(n, dtype=int), np.full(n, m - 1, dtype=int))
    coarse = fastdtw(cost.coarsen(A), cost.coarsen(B), cost, radius)
    lo, hi = _expand_window(coarse.pairs, n, m, radius)
    return _windowed_dp(A, B, cost, lo, hi)


@dataclass
class TedDetail:
    score: float
    arm_scores: list
    references: list  # EnvelopeResult per arm
    paths: list  # AlignmentPath per arm


def ted_for_arm(arm, dt: float, cfg: TedConfig = TedConfig()):
    ref: EnvelopeResult = build_reference(arm, dt, cfg)
    raw = pose_samples(arm.positions, arm.orientations)
    smooth = pose_samples(ref.positions, ref.orientations)
    path = fastdtw(raw, smooth, PoseCost(cfg.w_ori), cfg.dtw_radius)
    return path.normalized_cost, ref, path


def ted(traj: Trajectory, cfg: TedConfig = TedConfig(), detail: bool = False):
    """Path-normalised DTW cost between each arm and its smoothed reference.

    Lower is smoother; multi-arm trajectories average their arms. With
    ``detail=True`` a :class:`TedDetail` carrying references and paths is
    returned instead of the bare score.
    """
    scores, refs, paths = [], [], []
    for arm in traj.arms:
        s, ref, path = ted_for_arm(arm, traj.dt, cfg)
        scores.append(s)
        refs.append(ref)
        paths.append(path)
    score = float(np.mean(scores))
    if detail:
        return TedDetail(score, scores, refs, paths)
    return score
