"""End-to-end scoring, configuration files and oracle fixture regeneration."""
from __future__ import annotations

import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .alignment import ted
from .core import Trajectory
from .curation import ScoreRecord, WeightConfig
from .envelope import TedConfig
from .errors import EmptyBatch, ParseError, SmoothCurateError
from .spectral import SalConfig, sal_for_trajectory

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ORACLE_VERSION = 1
ORACLE_FILE = "oracles.json"


@dataclass(frozen=True)
class PipelineConfig:
    sal: SalConfig = field(default_factory=SalConfig)
    ted: TedConfig = field(default_factory=TedConfig)
    weight: WeightConfig = field(default_factory=WeightConfig)
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


_SECTIONS = {"sal": SalConfig, "ted": TedConfig, "weight": WeightConfig}


def config_from_mapping(values: dict, base: PipelineConfig | None = None) -> PipelineConfig:
    """Build a config from flat ``key = value`` pairs named after config fields."""
    base = base or PipelineConfig()
    updates: dict[str, dict] = {name: {} for name in _SECTIONS}
    top = {}
    owners = {f.name: name for name, cls in _SECTIONS.items() for f in fields(cls)}
    for key, val in values.items():
        if key in ("workers", "seed"):
            top[key] = int(val)
        elif key in owners:
            updates[owners[key]][key] = val
        else:
            raise ValueError(f"unknown config key {key!r}")
    parts = {name: replace(getattr(base, name), **upd) for name, upd in updates.items()}
    return replace(base, **parts, **top)


def load_config(path, base: PipelineConfig | None = None) -> PipelineConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            values = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(str(exc), path) from None
    nested = [k for k, v in values.items() if isinstance(v, dict)]
    if nested:
        raise ParseError(f"config must be flat; found tables {nested}", path)
    return config_from_mapping(values, base)


# --------------------------------------------------------------------------
# scoring


def score_one(traj: Trajectory, cfg: PipelineConfig = PipelineConfig(), metrics=("sal", "ted")) -> ScoreRecord:
    """Score one trajectory; failures become the record's ``error`` field."""
    vals = {}
    errors = []
    for name in metrics:
        try:
            vals[name] = sal_for_trajectory(traj, cfg.sal) if name == "sal" else ted(traj, cfg.ted)
        except SmoothCurateError as exc:
            errors.append(f"{name}: {type(exc).__name__}: {exc}")
    return ScoreRecord(traj.id, traj.metadata.get("domain"), error="; ".join(errors) or None, **vals)


def _score_star(args):
    return score_one(*args)


def score_all(trajectories, cfg: PipelineConfig = PipelineConfig(), metrics=("sal", "ted")) -> list[ScoreRecord]:
    """One record per trajectory, in input order, independent of worker count."""
    trajectories = list(trajectories)
    if not trajectories:
        raise EmptyBatch("no trajectories to score")
    jobs = [(t, cfg, tuple(metrics)) for t in trajectories]
    if cfg.workers == 1 or len(jobs) == 1:
        return [_score_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_score_star, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))


# --------------------------------------------------------------------------
# oracles
#
# Each oracle recomputes a reference value by a route that shares no code
# with the library: brute-force enumeration, closed forms, plain loops.


def _brute_dtw(a, b):
    """Minimum over every monotone warping path, by explicit enumeration.

    Among equal-cost paths the first one found (diagonal steps tried first)
    is kept, so the path itself may differ from a DP traceback on ties.
    """
    n, m = len(a), len(b)
    best = (math.inf, None)

    def walk(i, j, acc, path):
        nonlocal best
        acc += abs(a[i] - b[j])
        path = path + [(i, j)]
        if acc > best[0]:
            return
        if i == n - 1 and j == m - 1:
            if acc < best[0]:
                best = (acc, path)
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc, path)
        if i + 1 < n:
            walk(i + 1, j, acc, path)
        if j + 1 < m:
            walk(i, j + 1, acc, path)

    walk(0, 0, 0.0, [])
    return best


def _bezier_point(ctrl, t):
    deg = len(ctrl) - 1
    return [sum(math.comb(deg, k) * t**k * (1 - t) ** (deg - k) * c[d] for k, c in enumerate(ctrl))
            for d in range(len(ctrl[0]))]


def _bisect(f, lo=0.0, hi=1.0, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _greedy_first_insert(points, ctrl_idx):
    """First insertion of the greedy step, from direct Bernstein sums."""
    n = len(points)
    ctrl = [points[i] for i in ctrl_idx]
    times = [[i / (n - 1)] for i in ctrl_idx]
    resid = []
    for i in range(n):
        target = i / (n - 1)
        t = _bisect(lambda s: _bezier_point(times, s)[0] - target)
        p = _bezier_point(ctrl, t)
        resid.append(math.dist(p, points[i]))
    j = max(range(n), key=lambda k: resid[k])
    return j, resid


def _knn_brute(states, actions, k):
    z = (states - states.mean(axis=0)) / states.std(axis=0)
    total = 0.0
    for i in range(len(z)):
        d2 = np.sum((z - z[i]) ** 2, axis=1)
        nn = np.argsort(d2, kind="stable")[:k]
        total += float(np.sum(np.var(actions[nn], axis=0, ddof=1)))
    return total / len(z)


def compute_oracles(seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    out: dict = {"version": ORACLE_VERSION, "seed": seed}

    cost, path = _brute_dtw([0.0, 1.0, 2.0], [0.0, 2.0])
    out["dtw_small"] = {"a": [0, 1, 2], "b": [0, 2], "total": cost, "path": path}
    pairs = []
    for _ in range(5):
        a = rng.normal(size=int(rng.integers(2, 7))).round(6).tolist()
        b = rng.normal(size=int(rng.integers(2, 7))).round(6).tolist()
        c, p = _brute_dtw(a, b)
        pairs.append({"a": a, "b": b, "total": c, "path": p})
    out["dtw_random"] = pairs

    # 11-point line with a bump of height 0.3 at index 5; ten evenly spread initial controls
    pts = [[i / 10, 0.3 if i == 5 else 0.0, 0.0] for i in range(11)]
    initial = sorted({round(i * 10 / 9) for i in range(10)})
    j, resid = _greedy_first_insert(pts, initial)
    out["greedy_bump"] = {"points": pts, "initial": initial, "first_insert": j, "residuals": resid}

    # min-jerk: speed profile is the derivative of 10t^3 - 15t^4 + 6t^5
    prof = np.polynomial.Polynomial([0, 0, 0, 10, -15, 6])
    vel = prof.deriv()
    crit = [r.real for r in vel.deriv().roots() if abs(r.imag) < 1e-12 and 0 < r.real < 1]
    out["min_jerk"] = {"peak_tau": float(crit[0]), "peak_factor": float(vel(crit[0])),
                       "end_velocity": [float(vel(0)), float(vel(1))],
                       "end_acceleration": [float(vel.deriv()(0)), float(vel.deriv()(1))]}

    # rank badness on N evenly spaced points: linear 10th/90th percentiles are 0.1 and 0.9
    out["lambda"] = {"ratio": 10.0, "q10": 0.1, "q90": 0.9, "value": math.log(10.0) / 0.8}

    # zero speed signal: every log-amplitude equals ln(eps), the arc is the frequency span
    T, dt = 64, 0.05
    out["sal_zero"] = {"T": T, "dt": dt, "value": -(T // 2) / (T * dt)}

    mix = []
    for a, sc, sn in [(Fraction(1, 2), Fraction(1, 10), Fraction(1)), (Fraction(0), Fraction(2), Fraction(3)),
                      (Fraction(1), Fraction(2), Fraction(3)), (Fraction(3, 4), Fraction(1, 4), Fraction(5, 4))]:
        mix.append({"alpha": float(a), "clean": float(sc), "noisy": float(sn), "floor": float(a * sc + (1 - a) * sn)})
    out["mixture"] = mix

    chunk = {}
    for hc in (8, 16):
        steps = rng.normal(size=(100_000, hc))
        chunk[str(hc)] = float(np.trace(np.cov(steps, rowvar=False)) / np.var(steps[:, 0], ddof=1))
    out["chunk_ratio"] = chunk

    m, k = 1500, 8
    knn_seed = int(rng.integers(2**31))
    krng = np.random.default_rng(knn_seed)
    s = krng.uniform(size=(m, 2))
    a = krng.normal(scale=0.5, size=(m, 3))
    out["knn_isotropic"] = {"seed": knn_seed, "m": m, "k": k, "sigma": 0.5,
                            "estimate": _knn_brute(s, a, k), "expected": 3 * 0.25}

    curves = []
    for _ in range(10):
        N = int(rng.integers(5, 40))
        floor = np.sort(rng.uniform(0.0, 1.0, N)).tolist()
        C, d, Tl = float(rng.uniform(0.1, 5)), float(rng.uniform(1, 10)), float(rng.uniform(10, 200))
        vals = [floor[i] + C * d / ((i + 1) * Tl) for i in range(N)]
        kstar = min(range(N), key=lambda i: vals[i]) + 1
        curves.append({"floor": floor, "complexity": d, "capacity": C, "demo_length": Tl, "k_star": kstar})
    out["quality_quantity"] = curves
    return out


def run_oracles(seed: int = 0, out_dir=None) -> Path:
    """Write the oracle fixture file; returns its path."""
    out_dir = Path(out_dir) if out_dir is not None else Path.cwd() / "tests" / "fixtures"
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / ORACLE_FILE
    path.write_text(json.dumps(compute_oracles(seed), indent=1, sort_keys=True) + "\n")
    return path


def check_oracles(oracles: dict) -> list[tuple[str, bool, str]]:
    """Compare library results against oracle values; ``(name, ok, detail)`` rows."""
    from .alignment import dtw_exact, fastdtw
    from .curation import calibrate_lambda
    from .diagnostics import (QualityQuantityInput, StateActionSet, chunk_variance_ratio,
                              conditional_action_variance, mixture_noise_floor, quality_quantity_curve)
    from .envelope import greedy_envelope
    from .spectral import sal
    from .core import SpeedSignal
    from .synth import min_jerk_segment

    rows = []
    d = oracles["dtw_small"]
    p = dtw_exact(d["a"], d["b"])
    rows.append(("dtw_small", p.total_cost == d["total"] and len(p.pairs) == len(d["path"]),
                 f"cost {p.total_cost} path {p.pairs}"))
    ok = True
    for case in oracles["dtw_random"]:
        for fn in (dtw_exact, lambda a, b: fastdtw(a, b, radius=32)):
            q = fn(case["a"], case["b"])
            ok &= abs(q.total_cost - case["total"]) < 1e-9
    rows.append(("dtw_random", bool(ok), f"{len(oracles['dtw_random'])} pairs"))

    g = oracles["greedy_bump"]
    fit = greedy_envelope(np.array(g["points"]), 0.05, TedConfig(), g["initial"])
    got = fit.inserted[0] if fit.inserted else None
    rows.append(("greedy_bump", got == g["first_insert"], f"first insert {got}"))

    mj = oracles["min_jerk"]
    seg = min_jerk_segment([0, 0, 0], [1, 0, 0], 1.0, 1e-4)
    peak = float(np.max(np.diff(seg[:, 0]))) / 1e-4
    rows.append(("min_jerk", bool(abs(peak - mj["peak_factor"]) < 1e-6), f"peak speed {peak:.9g}"))

    lam = calibrate_lambda(np.arange(11) / 10.0, oracles["lambda"]["ratio"])
    rows.append(("lambda", bool(abs(lam - oracles["lambda"]["value"]) < 1e-12), f"{lam:.9g}"))

    sz = oracles["sal_zero"]
    v = sal(SpeedSignal(np.zeros(sz["T"]), sz["dt"]))
    rows.append(("sal_zero", bool(abs(v - sz["value"]) < 1e-12), f"{v:.12g}"))

    ok = all(mixture_noise_floor(m["alpha"], m["clean"], m["noisy"]) == m["floor"] for m in oracles["mixture"])
    rows.append(("mixture", ok, f"{len(oracles['mixture'])} fixtures"))

    ok = True
    for hc, ratio in oracles["chunk_ratio"].items():
        lib = chunk_variance_ratio(int(hc), seed=1)
        ok &= abs(lib / int(hc) - 1) < 0.05 and abs(ratio / int(hc) - 1) < 0.05
    rows.append(("chunk_ratio", bool(ok), str(oracles["chunk_ratio"])))

    kn = oracles["knn_isotropic"]
    krng = np.random.default_rng(kn["seed"])
    s = krng.uniform(size=(kn["m"], 2))
    a = krng.normal(scale=kn["sigma"], size=(kn["m"], 3))
    est = conditional_action_variance(StateActionSet(s, a), kn["k"])
    rows.append(("knn_isotropic", bool(abs(est - kn["estimate"]) < 1e-9), f"{est:.9g} vs {kn['estimate']:.9g}"))

    ok = True
    for c in oracles["quality_quantity"]:
        _, k = quality_quantity_curve(QualityQuantityInput(c["floor"], c["complexity"], c["capacity"], c["demo_length"]))
        ok &= k == c["k_star"]
    rows.append(("quality_quantity", bool(ok), f"{len(oracles['quality_quantity'])} curves"))
    return rows
