import json
import math
import os
import subprocess
from pathlib import Path

import pytest

CLI = os.environ.get("BUBBLECLUSTER_CLI", "bubblecluster")
ROOT = Path(__file__).resolve().parents[2]


def run(*args):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)


def test_constants_without_config(tmp_path):
    r = run("constants", "--n", 4, "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    c = json.loads((tmp_path / "constants.json").read_text())
    assert c["S_n"] == pytest.approx(32 * math.pi**2 / 3, rel=1e-10)
    assert c["S_n"] == pytest.approx(105.27578, abs=5e-6)
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["config_hash"] == c["config_hash"]
    assert m["timings"][0]["stage"] == "constants"


def test_cluster_certificate(tmp_path):
    r = run("cluster", "--config", ROOT / "configs" / "certified_pair.ini", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    cert = json.loads((tmp_path / "certificates.json").read_text())
    pts = cert["anchors"][0]["certificates"][0]["points"]
    assert sorted(p[0] for p in pts) == pytest.approx([-math.sqrt(0.5), math.sqrt(0.5)], abs=1e-10)
    assert all(abs(x) < 1e-10 for p in pts for x in p[1:])


def test_stage_flag_matches_subcommand(tmp_path):
    a = run("--stage", "constants", "--n", 5, "--out", tmp_path / "a")
    b = run("constants", "--n", 5, "--out", tmp_path / "b")
    assert a.returncode == b.returncode == 0
    assert (tmp_path / "a" / "constants.json").read_bytes() == (tmp_path / "b" / "constants.json").read_bytes()
    assert run("cluster", "--stage", "sweep", "--n", 4).returncode == 1


@pytest.mark.parametrize(
    "body",
    [
        "[run]\nn = four\n",
        "[run]\nn = 4\n[unknown]\nx = 1\n",
        "[run]\nn = 4\n[potential]\npolynomial = 1:0000, 0.5:2000\nanchors = 0.5 0 0 0\n[cluster]\nsizes = 2\n",
        "[run]\nn = 4\n[potential]\npolynomial = 2:0000\nanchors = 0 0 0 0\n[cluster]\nsizes = 1\n"
        "[schedule]\neps = 0.05, 0.1\n",
        "[run\nn = 4\n",
    ],
)
def test_malformed_config_exits_1_without_outputs(tmp_path, body):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(body)
    out = tmp_path / "out"
    r = run("all", "--config", cfg, "--out", out)
    assert r.returncode == 1, r.stderr
    assert not out.exists()


def test_numerical_failure_names_the_stage(tmp_path):
    # V has a minimum at the anchor: no two-point cluster is critical.
    cfg = tmp_path / "bowl.ini"
    cfg.write_text(
        "[run]\nn = 4\n[potential]\n"
        "polynomial = 2:0000, 0.5:2000, 0.5:0200, 0.5:0020, 0.5:0002\nanchors = 0 0 0 0\n"
        "[cluster]\nsizes = 2\nseeds = 8\n"
    )
    r = run("cluster", "--config", cfg, "--out", tmp_path / "out")
    assert r.returncode == 2
    assert "'cluster'" in r.stderr
    m = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert m["failed_stage"] == "cluster"
    assert m["exit_code"] == 2


def test_rows_carry_the_config_hash_and_reruns_match(tmp_path):
    cfg = ROOT / "configs" / "analytic_n5.ini"
    for d in ("a", "b"):
        assert run("all", "--config", cfg, "--out", tmp_path / d).returncode == 0
    h = json.loads((tmp_path / "a" / "manifest.json").read_text())["config_hash"]
    for name in ("sweep.csv", "expansion_reports.csv"):
        body = (tmp_path / "a" / name).read_text()
        assert body == (tmp_path / "b" / name).read_text()
        header, *rows = body.splitlines()
        assert header.endswith("config_hash")
        assert rows and all(r.endswith("," + h) for r in rows)
    # the seed enters the hash
    assert run("all", "--config", cfg, "--seed", 99, "--out", tmp_path / "c").returncode == 0
    assert json.loads((tmp_path / "c" / "manifest.json").read_text())["config_hash"] != h
