import csv
import json

import pytest

from conftest import FIXTURES
from smoothcurate.cli import main


def rows(path):
    return list(csv.DictReader(open(path)))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--count", "2", "--seed", "1", "--out", str(root / "demos")]) == 0
    assert main(["score", "--input", str(root / "demos"), "--out", str(root / "scores.csv")]) == 0
    return root


def test_synth_writes_files(workspace):
    files = sorted((workspace / "demos").glob("*.jsonl"))
    assert len(files) == 6
    header = json.loads(files[0].read_text().splitlines()[0])
    assert header["metadata"]["domain"].startswith("level")


def test_score_table(workspace):
    table = rows(workspace / "scores.csv")
    assert len(table) == 6
    assert all(r["sal"] and r["ted"] and not r["error"] for r in table)


def test_rank_filter_weight(workspace, capsys):
    ranked, kept, weighted = (workspace / n for n in ("ranked.csv", "kept.txt", "weighted.csv"))
    assert main(["rank", "--scores", str(workspace / "scores.csv"), "--metric", "ted", "--out", str(ranked)]) == 0
    assert [int(r["rank_ted"]) for r in rows(ranked)] == list(range(1, 7))
    assert main(["filter", "--ranked", str(ranked), "--top-k", "2", "--out", str(kept)]) == 0
    ids = kept.read_text().split()
    assert ids == [r["id"] for r in rows(ranked)[:2]]
    assert main(["weight", "--scores", str(workspace / "scores.csv"), "--out", str(weighted)]) == 0
    assert capsys.readouterr().out.startswith("lambda\t")
    assert all(0 < float(r["weight"]) <= 1 for r in rows(weighted))


def test_rerank(workspace):
    table = rows(workspace / "scores.csv")
    cands = workspace / "cands.csv"
    with cands.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "query", "similarity"])
        for i, r in enumerate(table):
            w.writerow([r["id"], "q" + str(i % 2), 1.0 - i / 10])
    out = workspace / "rerank.csv"
    args = ["rerank", "--candidates", str(cands), "--scores", str(workspace / "scores.csv"), "--out", str(out)]
    assert main(args + ["--R", "6", "--K", "2"]) == 0
    assert sorted(r["query"] for r in rows(out)) == ["q0", "q1"]
    assert main(args + ["--R", "6", "--K", "7"]) == 1


def test_diag_and_report(workspace, capsys):
    diag = workspace / "diag.csv"
    assert main(["diag", "--input", str(workspace / "demos"), "--out", str(diag)]) == 0
    assert [r["group"] for r in rows(diag)] == ["level0", "level1", "level2"]
    rep = workspace / "report"
    assert main(["report", "--scores", str(workspace / "scores.csv"), "--input", str(workspace / "demos"),
                 "--out", str(rep)]) == 0
    assert {p.name for p in rep.iterdir()} == {"summary.csv", "spectra.csv", "residuals.csv"}


def test_malformed_input_exit_status(workspace, tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "x", "dt": 0.1, "arm_count": 1}\n{"t": 0, "pos": [0, 0]}\n')
    assert main(["score", "--input", str(bad), "--out", str(tmp_path / "s.csv")]) == 1
    assert "bad.jsonl:2" in capsys.readouterr().err


def test_partial_directory_exit_status(workspace, tmp_path):
    demos = tmp_path / "demos"
    demos.mkdir()
    good = sorted((workspace / "demos").glob("*.jsonl"))[0]
    (demos / good.name).write_text(good.read_text())
    (demos / "broken.jsonl").write_text("{not json\n")
    out = tmp_path / "s.csv"
    assert main(["score", "--input", str(demos), "--out", str(out)]) == 1
    assert len(rows(out)) == 1


def test_selfcheck(capsys):
    assert main(["selfcheck", "--fixtures", str(FIXTURES / "oracles.json")]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 10


def test_missing_file_exit_status(tmp_path):
    assert main(["rank", "--scores", str(tmp_path / "none.csv"), "--out", str(tmp_path / "r.csv")]) == 1
