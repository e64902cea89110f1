"""Ranking, filtering and soft weighting of scored demonstrations."""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CandidateShortfall,
    DegenerateDistribution,
    GroupTooSmall,
    InvalidBudget,
    MissingScore,
    ShapeError,
)

METRICS = ("sal", "ted")
# larger SAL is smoother, smaller TED is smoother
DEFAULT_DIRECTION = {"sal": "descending", "ted": "ascending"}


@dataclass(frozen=True)
class ScoreRecord:
    id: str
    domain: str | None = None
    sal: float | None = None
    ted: float | None = None
    rank_sal: int | None = None
    rank_ted: int | None = None
    badness: float | None = None
    weight: float | None = None
    error: str | None = None

    def __post_init__(self):
        if self.weight is not None and not self.weight > 0:
            raise ValueError(f"weight must be positive, got {self.weight}")

    def metric(self, name: str) -> float:
        if name not in METRICS:
            raise ValueError(f"unknown metric {name!r}")
        value = getattr(self, name)
        if value is None or not math.isfinite(value):
            raise MissingScore(f"record {self.id!r} has no {name} score")
        return value


@dataclass(frozen=True)
class WeightConfig:
    normalization: str = "rank"
    ratio: float = 10.0
    metric: str = "ted"

    def __post_init__(self):
        if self.normalization not in ("zscore", "rank"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if not self.ratio > 1:
            raise ValueError("ratio must be > 1")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")


def rank(records: Iterable[ScoreRecord], metric: str, direction: str | None = None) -> list[ScoreRecord]:
    """Best-first ordering; each returned record has its ``rank_<metric>`` set (1-based)."""
    records = list(records)
    direction = direction or DEFAULT_DIRECTION[metric]
    if direction not in ("ascending", "descending"):
        raise ValueError(f"unknown direction {direction!r}")
    sign = -1.0 if direction == "descending" else 1.0
    keyed = sorted(records, key=lambda r: (sign * r.metric(metric), r.id))
    field = f"rank_{metric}"
    return [replace(r, **{field: i + 1}) for i, r in enumerate(keyed)]


def select_top_k(ranked: Sequence[ScoreRecord], k: int) -> list[str]:
    if not 1 <= k <= len(ranked):
        raise InvalidBudget(f"k={k} outside [1, {len(ranked)}]")
    return [r.id for r in ranked[:k]]


def _badness(record: ScoreRecord, metric: str) -> float:
    value = record.metric(metric)
    return -value if metric == "sal" else value


def _groups(records: Sequence[ScoreRecord]) -> "OrderedDict[str | None, list[int]]":
    groups: OrderedDict = OrderedDict()
    for i, r in enumerate(records):
        groups.setdefault(r.domain, []).append(i)
    return groups


def normalize_scores(records: Iterable[ScoreRecord], mode: str = "rank", metric: str = "ted") -> list[ScoreRecord]:
    """Attach per-domain badness ``q`` (larger is rougher) to every record.

    ``zscore`` uses the population standard deviation; ``rank`` maps the
    1-based badness rank to ``(rank - 1) / (N - 1)`` with ties broken by id.
    """
    records = list(records)
    q = [0.0] * len(records)
    for domain, idx in _groups(records).items():
        if len(idx) < 2:
            raise GroupTooSmall(f"group {domain!r} has {len(idx)} record(s); need >= 2")
        b = np.array([_badness(records[i], metric) for i in idx])
        if mode == "zscore":
            sigma = b.std()
            if not sigma > 0:
                raise DegenerateDistribution(f"zero variance in group {domain!r}")
            vals = (b - b.mean()) / sigma
        elif mode == "rank":
            order = sorted(range(len(idx)), key=lambda k: (b[k], records[idx[k]].id))
            vals = np.empty(len(idx))
            vals[order] = np.arange(len(idx)) / (len(idx) - 1)
        else:
            raise ValueError(f"unknown normalization {mode!r}")
        for i, v in zip(idx, vals):
            q[i] = float(v)
    return [replace(r, badness=v) for r, v in zip(records, q)]


def calibrate_lambda(q, ratio: float = 10.0, eps_num: float = 1e-9) -> float:
    """Temperature giving a weight ratio ``w90 / w10 == ratio`` for ``w = exp(-lam q)``."""
    q = np.asarray(q, dtype=float)
    q10, q90 = np.percentile(q, [10.0, 90.0])
    spread = q90 - q10
    if spread <= eps_num:
        raise DegenerateDistribution("10th and 90th badness percentiles coincide")
    return math.log(ratio) / spread


def soft_weights(q, lam: float) -> np.ndarray:
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return np.exp(-lam * np.asarray(q, dtype=float))


def weighted_group_loss(losses, weights) -> float:
    """Weight-normalised mean ``sum(w * l) / sum(w)``."""
    losses = np.asarray(losses, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if losses.shape != weights.shape or losses.ndim != 1:
        raise ShapeError(f"losses {losses.shape} and weights {weights.shape} must be equal 1-D shapes")
    if len(losses) == 0:
        raise ShapeError("need at least one trajectory")
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    return float(np.dot(weights, losses) / weights.sum())


def apply_weights(records: Iterable[ScoreRecord], cfg: WeightConfig = WeightConfig()) -> tuple[list[ScoreRecord], float]:
    """Normalise, calibrate one lambda on all badness values, attach weights."""
    normed = normalize_scores(records, cfg.normalization, cfg.metric)
    q = np.array([r.badness for r in normed])
    lam = calibrate_lambda(q, cfg.ratio)
    w = soft_weights(q, lam)
    return [replace(r, weight=float(wi)) for r, wi in zip(normed, w)], lam


def rerank_candidates(candidates: Sequence[tuple[str, float]], scores: Mapping[str, ScoreRecord], metric: str,
                      R: int = 400, K: int = 200, queries: Mapping[str, str] | None = None,
                      query_order: Sequence[str] | None = None) -> list[str]:
    """Keep top-``R`` by similarity per query, re-sort by smoothness, keep ``K``.

    Each query gets ``K // Q`` slots; the ``K % Q`` leftover slots go one per
    query in query order, each filled by that query's next-best candidate.
    Queries are ordered by ``query_order`` or, by default, sorted by name.
    Higher similarity is better.
    """
    queries = queries or {}
    by_query: dict[str, list[tuple[str, float]]] = {}
    for cid, sim in candidates:
        by_query.setdefault(queries.get(cid, ""), []).append((cid, float(sim)))
    order = list(query_order) if query_order is not None else sorted(by_query)
    Q = len(order)
    if Q < 1 or not (R >= K >= Q):
        raise InvalidBudget(f"need R >= K >= Q >= 1, got R={R}, K={K}, Q={Q}")
    direction = DEFAULT_DIRECTION[metric]
    sign = -1.0 if direction == "descending" else 1.0
    per_query, extra = divmod(K, Q)
    ranked: dict[str, list[str]] = {}
    for qid in order:
        pool = sorted(by_query.get(qid, []), key=lambda c: (-c[1], c[0]))[:R]
        for cid, _ in pool:
            if cid not in scores:
                raise MissingScore(f"candidate {cid!r} has no score record")
        pool_ids = sorted((cid for cid, _ in pool), key=lambda c: (sign * scores[c].metric(metric), c))
        need = per_query + (1 if order.index(qid) < extra else 0)
        if len(pool_ids) < need:
            raise CandidateShortfall(f"query {qid!r} has {len(pool_ids)} candidates, needs {need}")
        ranked[qid] = pool_ids
    kept = [cid for qid in order for cid in ranked[qid][:per_query]]
    kept += [ranked[qid][per_query] for qid in order[:extra]]
    return kept
