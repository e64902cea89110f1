import json
from dataclasses import replace

import numpy as np
import pytest

from conftest import FIXTURES, line_arm, traj_of
from smoothcurate.envelope import TedConfig
from smoothcurate.errors import EmptyBatch, ParseError
from smoothcurate.pipeline import (
    PipelineConfig,
    check_oracles,
    compute_oracles,
    config_from_mapping,
    load_config,
    run_oracles,
    score_all,
)
from smoothcurate.synth import SynthConfig, synth_dataset


@pytest.fixture(scope="module")
def small_batch():
    return synth_dataset(SynthConfig(), 1, seed=0)


def test_one_record_per_input_in_order(small_batch):
    recs = score_all(small_batch)
    assert [r.id for r in recs] == [t.id for t in small_batch]
    assert all(r.sal is not None and r.ted is not None and r.error is None for r in recs)
    rev = score_all(small_batch[::-1])
    assert [r.id for r in rev] == [t.id for t in small_batch[::-1]]


def test_empty_batch():
    with pytest.raises(EmptyBatch):
        score_all([])


def test_deterministic_and_worker_independent(small_batch):
    a = score_all(small_batch)
    b = score_all(small_batch)
    c = score_all(small_batch, PipelineConfig(workers=2))
    assert a == b == c


def test_failure_is_isolated(small_batch):
    short = traj_of(line_arm(3), id="short")
    recs = score_all([small_batch[0], short, small_batch[1]])
    assert recs[0].error is None and recs[2].error is None
    assert recs[1].sal is None and "SignalTooShort" in recs[1].error


def test_metric_subset(small_batch):
    (r,) = score_all(small_batch[:1], metrics=("sal",))
    assert r.ted is None and r.sal is not None


def test_config_mapping():
    cfg = config_from_mapping({"w_ori": 0.5, "ratio": 5.0, "workers": 2})
    assert cfg.ted.w_ori == 0.5 and cfg.weight.ratio == 5.0 and cfg.workers == 2
    assert cfg.ted == replace(TedConfig(), w_ori=0.5)
    with pytest.raises(ValueError):
        config_from_mapping({"bogus": 1})


def test_load_config(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('w_ori = 0.125\nnormalization = "zscore"\n')
    cfg = load_config(p)
    assert cfg.ted.w_ori == 0.125 and cfg.weight.normalization == "zscore"
    p.write_text("[ted]\nw_ori = 1\n")
    with pytest.raises(ParseError):
        load_config(p)
    p.write_text("w_ori = = 1\n")
    with pytest.raises(ParseError):
        load_config(p)


def test_oracle_fixture_regenerates(tmp_path):
    stored = json.loads((FIXTURES / "oracles.json").read_text())
    path = run_oracles(stored["seed"], tmp_path)
    assert json.loads(path.read_text()) == stored


def test_oracles_pass(oracles):
    results = check_oracles(oracles)
    failed = [(n, d) for n, ok, d in results if not ok]
    assert not failed
    assert len(results) >= 10


def test_oracles_are_seeded():
    a, b = compute_oracles(1), compute_oracles(1)
    assert json.dumps(a) == json.dumps(b)
    assert compute_oracles(2)["dtw_random"] != a["dtw_random"]
