"""Batch command-line interface.

Every subcommand reads and writes plain files; the score table is the
interchange format between ``score``, ``rank``, ``filter``, ``weight``,
``rerank`` and ``report``. The exit status is 0 exactly when no errors were
collected.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .curation import METRICS, WeightConfig, apply_weights, rank, rerank_candidates
from .diagnostics import conditional_action_variance, state_action_from_trajectories
from .errors import SmoothCurateError
from .pipeline import PipelineConfig, check_oracles, compute_oracles, load_config, run_oracles, score_all
from .spectral import SalConfig
from .synth import NOISE_KINDS, TREMOR, NoiseSpec, SynthConfig, synth_dataset

log = logging.getLogger("smoothcurate")


class Run:
    """Collects errors for the exit status."""

    def __init__(self):
        self.errors: list[str] = []

    def error(self, msg):
        self.errors.append(str(msg))
        print(f"error: {msg}", file=sys.stderr)

    @property
    def status(self) -> int:
        return 1 if self.errors else 0


def _load(path, run: Run, dt_override=None):
    res = io.load_demonstrations(path)
    for exc in res.errors:
        run.error(exc)
    trajs = res.trajectories
    if dt_override is not None:
        trajs = [replace(t, dt=float(dt_override)) for t in trajs]
    log.info("loaded %d trajectories (%d errors)", len(trajs), len(res.errors))
    return sorted(trajs, key=lambda t: t.id)


def cmd_score(args, run: Run):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.speed_source:
        cfg = replace(cfg, sal=replace(cfg.sal, speed_source=args.speed_source))
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    trajs = _load(args.input, run, args.dt_override)
    if not trajs:
        run.error("no trajectories loaded")
        return
    metrics = METRICS if args.metric == "both" else (args.metric,)
    records = score_all(trajs, cfg, metrics)
    for r in records:
        if r.error:
            run.error(f"{r.id}: {r.error}")
    io.write_scores(records, args.out)


def cmd_rank(args, run: Run):
    records = io.read_scores(args.scores)
    usable = []
    for r in records:
        if getattr(r, args.metric) is None:
            run.error(f"{r.id}: no {args.metric} score")
        else:
            usable.append(r)
    io.write_scores(rank(usable, args.metric), args.out)


def cmd_filter(args, run: Run):
    records = io.read_scores(args.ranked)
    metric = args.metric
    if metric is None:
        metric = next((m for m in METRICS if all(getattr(r, f"rank_{m}") is not None for r in records)), None)
        if metric is None:
            run.error("ranked table has no complete rank column; pass --metric")
            return
    field = f"rank_{metric}"
    ordered = sorted(records, key=lambda r: (getattr(r, field), r.id))
    from .curation import select_top_k

    io.write_ids(select_top_k(ordered, args.top_k), args.out)


def cmd_weight(args, run: Run):
    records = io.read_scores(args.scores)
    cfg = WeightConfig(args.normalization, args.ratio, args.metric)
    weighted, lam = apply_weights(records, cfg)
    log.info("lambda = %.9g", lam)
    print(f"lambda\t{lam:.9g}")
    io.write_scores(sorted(weighted, key=lambda r: r.id), args.out)


def cmd_rerank(args, run: Run):
    scores = {r.id: r for r in io.read_scores(args.scores)}
    cands, queries = io.read_candidates(args.candidates)
    kept = rerank_candidates(cands, scores, args.metric, args.R, args.K, queries)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "query", args.metric])
        for cid in kept:
            w.writerow([cid, queries[cid], io.fmt(getattr(scores[cid], args.metric))])


def cmd_diag(args, run: Run):
    trajs = _load(args.input, run)
    groups: dict[str, list] = {}
    for t in trajs:
        groups.setdefault(t.metadata.get("domain") or "all", []).append(t)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "trajectories", "pairs", "knn", "noise_floor"])
        for name in sorted(groups):
            data = state_action_from_trajectories(groups[name])
            try:
                floor = conditional_action_variance(data, args.knn)
            except ValueError as exc:
                run.error(f"group {name}: {exc}")
                continue
            w.writerow([name, len(groups[name]), len(data), args.knn, io.fmt(floor)])


def synth_config_from_file(path):
    """Flat synth settings plus a noise ladder (``noise_kind``, ``amplitudes``, ``frequency``)."""
    from .pipeline import tomllib

    with Path(path).open("rb") as fh:
        raw = tomllib.load(fh)
    kind = raw.pop("noise_kind", TREMOR)
    if kind not in NOISE_KINDS:
        raise ValueError(f"unknown noise_kind {kind!r}")
    amps = raw.pop("amplitudes", [0.0, 0.01, 0.05])
    freq = raw.pop("frequency", 6.0 if kind == TREMOR else None)
    for key in ("waypoints", "durations", "contact_toggles", "orientation_keyframes"):
        if key in raw and raw[key] is not None:
            raw[key] = tuple(tuple(v) if isinstance(v, list) else v for v in raw[key])
    return SynthConfig(**raw), [NoiseSpec(kind, float(a), freq) for a in amps]


def cmd_synth(args, run: Run):
    if args.config:
        cfg, levels = synth_config_from_file(args.config)
    else:
        from .synth import DEFAULT_QUALITY_LEVELS

        cfg, levels = SynthConfig(), list(DEFAULT_QUALITY_LEVELS)
    trajs = synth_dataset(cfg, args.count, levels, args.seed)
    out = Path(args.out)
    for t in trajs:
        meta = dict(t.metadata)
        meta.setdefault("domain", f"level{meta['quality_level']}")
        io.write_demonstration(replace(t, metadata=meta), out / f"{t.id}.jsonl")
    print(f"wrote {len(trajs)} demonstrations to {out}")


def cmd_report(args, run: Run):
    records = sorted(io.read_scores(args.scores), key=lambda r: r.id)
    spectra = envelopes = None
    if args.input:
        from .alignment import ted
        from .core import derive_speed_signal
        from .spectral import one_sided_spectrum

        spectra, envelopes = {}, {}
        for t in _load(args.input, run):
            try:
                spectra[t.id] = [one_sided_spectrum(derive_speed_signal(a, t.dt), SalConfig()) for a in t.arms]
                det = ted(t, detail=True)
                envelopes[t.id] = [(ref, a.positions) for ref, a in zip(det.references, t.arms)]
            except SmoothCurateError as exc:
                run.error(f"{t.id}: {exc}")
    written = io.emit_report(records, args.out, args.group_by, spectra, envelopes)
    for name, path in written.items():
        print(f"{name}\t{path}")


def cmd_selfcheck(args, run: Run):
    oracles = compute_oracles(args.seed)
    if args.fixtures:
        stored = json.loads(Path(args.fixtures).read_text())
        if stored != json.loads(json.dumps(oracles)):
            run.error(f"stored oracle fixtures {args.fixtures} differ from regenerated values")
    for name, ok, detail in check_oracles(oracles):
        print(f"{'PASS' if ok else 'FAIL'}\t{name}\t{detail}")
        if not ok:
            run.error(f"oracle {name} failed")
    if args.write:
        print(f"wrote {run_oracles(args.seed, args.write)}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smoothcurate", description="Score, rank and curate demonstrations by smoothness.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("score", help="compute SAL and/or TED for demonstration files")
    s.add_argument("--input", required=True, help="demonstration file or directory")
    s.add_argument("--metric", choices=["sal", "ted", "both"], default="both")
    s.add_argument("--dt-override", type=float)
    s.add_argument("--speed-source", choices=["recorded", "differenced"])
    s.add_argument("--config")
    s.add_argument("--workers", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("rank", help="order a score table best-first")
    s.add_argument("--scores", required=True)
    s.add_argument("--metric", choices=METRICS, default="ted")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("filter", help="keep the top-K ids of a ranked table")
    s.add_argument("--ranked", required=True)
    s.add_argument("--top-k", type=int, required=True)
    s.add_argument("--metric", choices=METRICS)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_filter)

    s = sub.add_parser("weight", help="attach soft weights to a score table")
    s.add_argument("--scores", required=True)
    s.add_argument("--normalization", choices=["zscore", "rank"], default="rank")
    s.add_argument("--ratio", type=float, default=10.0)
    s.add_argument("--metric", choices=METRICS, default="ted")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_weight)

    s = sub.add_parser("rerank", help="similarity top-R then smoothness top-K per query")
    s.add_argument("--candidates", required=True, help="CSV with id, query, similarity")
    s.add_argument("--scores", required=True)
    s.add_argument("--R", type=int, default=400)
    s.add_argument("--K", type=int, default=200)
    s.add_argument("--metric", choices=METRICS, default="ted")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rerank)

    s = sub.add_parser("diag", help="k-NN noise-floor estimate per domain")
    s.add_argument("--input", required=True)
    s.add_argument("--knn", type=int, default=8)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_diag)

    s = sub.add_parser("synth", help="generate a labelled synthetic dataset")
    s.add_argument("--config")
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("report", help="plot-ready summary, spectrum and residual tables")
    s.add_argument("--scores", required=True)
    s.add_argument("--group-by", default="domain")
    s.add_argument("--input", help="demonstrations, to also emit spectra and residuals")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("selfcheck", help="regenerate oracles and check the library against them")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--fixtures", help="stored oracle file to compare against")
    s.add_argument("--write", help="directory to write regenerated fixtures into")
    s.set_defaults(func=cmd_selfcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    run = Run()
    try:
        args.func(args, run)
    except (SmoothCurateError, OSError, ValueError, KeyError) as exc:
        run.error(exc)
    return run.status


if __name__ == "__main__":
    sys.exit(main())
