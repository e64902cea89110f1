"""Demonstration files, score tables and plot-ready reports.

Demonstrations are line-delimited JSON. The first line is a header::

    {"id": "demo_001", "dt": 0.05, "arm_count": 1, "metadata": {"domain": "vr"}}

and every following line is one frame::

    {"t": 0, "arms": [{"pos": [x, y, z], "quat": [w, x, y, z], "gripper": 0, "vel": [vx, vy, vz]}]}

``vel`` is optional. Single-arm files may put ``pos``/``quat``/``gripper``/``vel``
directly on the frame instead of inside ``arms``. Continuous gripper values
are thresholded at 0.5.

Converting from common robot-dataset layouts: take the end-effector position
and orientation streams (convert rotation matrices or ``(x, y, z, w)``
quaternions to ``(w, x, y, z)``), the gripper open/close command or width
normalised to ``[0, 1]``, and the control period as ``dt``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .core import ArmTrack, Trajectory, validate_trajectory
from .curation import ScoreRecord
from .errors import ParseError, SmoothCurateError, ValidationError

SCORE_COLUMNS = ["id", "domain", "sal", "ted", "rank_sal", "rank_ted", "badness", "weight", "error"]
FLOAT_FIELDS = ("sal", "ted", "badness", "weight")
INT_FIELDS = ("rank_sal", "rank_ted")
DEMO_SUFFIXES = (".jsonl", ".ndjson")


def fmt(x) -> str:
    """Nine significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.9g}"


# --------------------------------------------------------------------------
# demonstrations


def _vec(obj, key, n, path, line):
    val = obj.get(key)
    if not isinstance(val, list) or len(val) != n:
        raise ParseError(f"field {key!r} must be a list of {n} numbers, got {val!r}", path, line)
    try:
        return [float(v) for v in val]
    except (TypeError, ValueError):
        raise ParseError(f"field {key!r} has non-numeric entries", path, line) from None


def read_demonstration(path) -> Trajectory:
    """Parse one demonstration file; raises on the first problem found."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path) from exc
    records = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not records:
        raise ParseError("empty file", path)
    parsed = []
    for lineno, text in records:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", path, lineno) from None
        if not isinstance(obj, dict):
            raise ParseError("record must be a JSON object", path, lineno)
        parsed.append((lineno, obj))

    hline, header = parsed[0]
    for key in ("id", "dt", "arm_count"):
        if key not in header:
            raise ParseError(f"header missing {key!r}", path, hline)
    try:
        dt = float(header["dt"])
        arm_count = int(header["arm_count"])
    except (TypeError, ValueError):
        raise ParseError("header dt/arm_count must be numeric", path, hline) from None
    if arm_count < 1:
        raise ParseError("arm_count must be >= 1", path, hline)
    metadata = {str(k): str(v) for k, v in (header.get("metadata") or {}).items()}

    pos = [[] for _ in range(arm_count)]
    quat = [[] for _ in range(arm_count)]
    grip = [[] for _ in range(arm_count)]
    vel = [[] for _ in range(arm_count)]
    for expected_t, (lineno, frame) in enumerate(parsed[1:]):
        if frame.get("t") != expected_t:
            raise ParseError(f"expected frame t={expected_t}, got {frame.get('t')!r}", path, lineno)
        arms = frame.get("arms")
        if arms is None and arm_count == 1 and "pos" in frame:
            arms = [frame]
        if not isinstance(arms, list) or len(arms) != arm_count:
            raise ParseError(f"frame must list {arm_count} arm record(s)", path, lineno)
        for k, arm in enumerate(arms):
            if not isinstance(arm, dict):
                raise ParseError("arm record must be a JSON object", path, lineno)
            pos[k].append(_vec(arm, "pos", 3, path, lineno))
            quat[k].append(_vec(arm, "quat", 4, path, lineno))
            g = arm.get("gripper")
            if isinstance(g, bool) or not isinstance(g, (int, float)):
                raise ParseError(f"gripper must be numeric, got {g!r}", path, lineno)
            grip[k].append(float(g))
            if "vel" in arm:
                vel[k].append(_vec(arm, "vel", 3, path, lineno))
    n_frames = len(parsed) - 1
    tracks = []
    for k in range(arm_count):
        if vel[k] and len(vel[k]) != n_frames:
            raise ParseError(f"arm {k}: velocities present on only some frames", path)
        tracks.append(ArmTrack(np.array(pos[k]).reshape(-1, 3), np.array(quat[k]).reshape(-1, 4),
                               np.array(grip[k]), np.array(vel[k]) if vel[k] else None))
    traj = Trajectory(str(header["id"]), dt, tuple(tracks), metadata)
    problems = validate_trajectory(traj)
    if problems:
        raise ValidationError(traj.id, problems)
    return traj


def write_demonstration(traj: Trajectory, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"id": traj.id, "dt": traj.dt, "arm_count": len(traj.arms), "metadata": dict(traj.metadata)}
    with path.open("w") as fh:
        fh.write(json.dumps(header) + "\n")
        for t in range(traj.length):
            arms = []
            for arm in traj.arms:
                rec = {
                    "pos": arm.positions[t].tolist(),
                    "quat": arm.orientations[t].tolist(),
                    "gripper": int(arm.gripper[t]),
                }
                if arm.velocities is not None:
                    rec["vel"] = arm.velocities[t].tolist()
                arms.append(rec)
            fh.write(json.dumps({"t": t, "arms": arms}) + "\n")
    return path


@dataclass
class LoadResult:
    trajectories: list = field(default_factory=list)
    errors: list = field(default_factory=list)  # SmoothCurateError instances, with file context

    @property
    def ok(self) -> bool:
        return not self.errors


def demonstration_files(path) -> list[Path]:
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix in DEMO_SUFFIXES)
    return [path]


def load_demonstrations(path) -> LoadResult:
    """Load a file or every ``*.jsonl`` in a directory, collecting per-file errors."""
    result = LoadResult()
    for f in demonstration_files(path):
        try:
            result.trajectories.append(read_demonstration(f))
        except ValidationError as exc:
            exc.args = (f"{f}: {exc}",)
            result.errors.append(exc)
        except SmoothCurateError as exc:
            result.errors.append(exc)
    return result


# --------------------------------------------------------------------------
# score tables


def write_scores(records: Iterable[ScoreRecord], path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SCORE_COLUMNS)
            for r in records:
                writer.writerow([
                    r.id,
                    r.domain or "",
                    fmt(r.sal),
                    fmt(r.ted),
                    fmt(r.rank_sal),
                    fmt(r.rank_ted),
                    fmt(r.badness),
                    fmt(r.weight),
                    r.error or "",
                ])
    except OSError as exc:
        raise OSError(f"cannot write score table {path}: {exc}") from exc
    return path


def read_scores(path) -> list[ScoreRecord]:
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise OSError(f"cannot read score table {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames:
            raise ParseError("score table needs a header row with an 'id' column", path, 1)
        out, seen = [], set()
        for lineno, row in enumerate(reader, start=2):
            rid = row["id"]
            if rid in seen:
                raise ParseError(f"duplicate id {rid!r}", path, lineno)
            seen.add(rid)
            kw = {"id": rid, "domain": row.get("domain") or None, "error": row.get("error") or None}
            try:
                for name in FLOAT_FIELDS:
                    cell = row.get(name) or ""
                    kw[name] = float(cell) if cell != "" else None
                    if kw[name] is not None and not math.isfinite(kw[name]):
                        raise ValueError(f"{name} is not finite")
                for name in INT_FIELDS:
                    cell = row.get(name) or ""
                    kw[name] = int(cell) if cell != "" else None
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
            out.append(ScoreRecord(**kw))
    return out


def write_ids(ids, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{i}\n" for i in ids))
    return path


def read_candidates(path):
    """Candidate table with columns ``id, query, similarity``."""
    path = Path(path)
    cands, queries = [], {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"id", "query", "similarity"} - set(reader.fieldnames or [])
        if missing:
            raise ParseError(f"candidate table missing columns {sorted(missing)}", path, 1)
        for lineno, row in enumerate(reader, start=2):
            try:
                cands.append((row["id"], float(row["similarity"])))
            except ValueError:
                raise ParseError("similarity must be numeric", path, lineno) from None
            queries[row["id"]] = row["query"]
    return cands, queries


# --------------------------------------------------------------------------
# reports


def _summary(values) -> list[str]:
    v = np.array([x for x in values if x is not None], dtype=float)
    if len(v) == 0:
        return ["0"] + [""] * 6
    q25, med, q75 = np.percentile(v, [25, 50, 75])
    return [str(len(v)), fmt(v.mean()), fmt(v.std()), fmt(q25), fmt(med), fmt(q75), fmt(v.min())]


def group_summaries(records: Iterable[ScoreRecord], group_by: str = "domain") -> list[list[str]]:
    groups: dict[str, list[ScoreRecord]] = {}
    for r in records:
        key = (getattr(r, group_by, None) if group_by else None) or "all"
        groups.setdefault(str(key), []).append(r)
    rows = []
    for key in sorted(groups):
        for metric in ("sal", "ted"):
            rows.append([key, metric] + _summary(getattr(r, metric) for r in groups[key]))
    return rows


def emit_report(records, out_dir, group_by: str = "domain", spectra: Mapping | None = None,
                envelopes: Mapping | None = None) -> dict[str, Path]:
    """Write plot-ready CSV tables into ``out_dir``.

    ``summary.csv`` always; ``spectra.csv`` when ``spectra`` maps an id to a
    :class:`~smoothcurate.spectral.Spectrum` (or a list of them, one per
    arm); ``residuals.csv`` when ``envelopes`` maps an id to a list of
    ``(EnvelopeResult, raw_positions)`` pairs, one per arm.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    p = out / "summary.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "metric", "n", "mean", "std", "q25", "median", "q75", "min"])
        w.writerows(group_summaries(records, group_by))
    written["summary"] = p
    if spectra:
        p = out / "spectra.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "arm", "k", "freq_hz", "log_amp"])
            for rid in sorted(spectra):
                specs = spectra[rid]
                specs = specs if isinstance(specs, (list, tuple)) else [specs]
                for arm, sp in enumerate(specs):
                    for k, (f, la) in enumerate(zip(sp.freqs, sp.log_amps)):
                        w.writerow([rid, arm, k, fmt(f), fmt(la)])
        written["spectra"] = p
    if envelopes:
        p = out / "residuals.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "arm", "index", "region_kind", "phase", "residual"])
            for rid in sorted(envelopes):
                for arm, (env, raw) in enumerate(envelopes[rid]):
                    res = env.residuals(raw)
                    for reg in env.partition.regions:
                        for i in range(reg.start, reg.end + 1):
                            w.writerow([rid, arm, i, reg.kind, reg.phase, fmt(res[i])])
        written["residuals"] = p
    return written
