import csv
import json

import numpy as np
import pytest

from fracmix.cli import (DEFAULT_CONFIG, load_config, main, run)
from fracmix.errors import ConfigError

SMALL = """\
[partition]
omega = -1:1
sigma1 = -inf:-1, 2:inf
sigma2 = 1:2
s = 0.5

[mesh]
n_omega = 16, 24
n_sigma2 = 8, 8

[families]
kind = bumps
count = 3
seed = 2024

[walker]
n_walkers = 5000
seed = 99

[certificates]
requested = poincare, elliptic_hopf, comparison

[output]
dir = {out}
"""


def test_parse_default_config():
    cfg = load_config(DEFAULT_CONFIG)
    assert cfg.partition.s == 0.5
    assert cfg.mesh_sweep == [(64, 16), (128, 32), (256, 64)]
    assert cfg.family.count == 10
    assert len(cfg.requested) == 13


def test_interval_parsing_rejects_garbage():
    with pytest.raises(ConfigError):
        load_config("[partition]\nomega = banana\n")


def test_unknown_certificate_rejected():
    with pytest.raises(ConfigError):
        load_config("[certificates]\nrequested = nonsense\n")


def test_malformed_partition_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[partition]\nomega = -1:1\nsigma1 = 1:3\nsigma2 = 2:4\ns = 0.5\n")
    rc = main(["verify", "--config", str(bad)])
    assert rc == 2
    assert "Overlap" in capsys.readouterr().err


def test_solve_emits_field_csv(tmp_path):
    cfg = load_config(SMALL.format(out=tmp_path / "out"))
    rep = run("solve", cfg)
    path = tmp_path / "out" / "fields" / "xi0.csv"
    assert path.exists()
    with open(path) as fh:
        rows = list(csv.reader(fh))
    # header plus one row per mesh node
    n_nodes = len(rep.certificates) * 0 + 25 + 9 - 1  # omega + sigma2 shared node
    assert rows[0] == ["x", "value"]
    assert len(rows) - 1 == n_nodes


def test_eigen_subcommand(tmp_path):
    cfg = load_config(SMALL.format(out=tmp_path / "out"))
    rep = run("eigen", cfg)
    names = {c.name for c in rep.certificates}
    assert names == {"lambda1_mixed", "lambda1_dirichlet"}
    assert rep.all_pass


def test_verify_subset_and_exit_codes(tmp_path):
    out = tmp_path / "out"
    rc = main(["verify", "--config", _write(tmp_path, SMALL.format(out=out))])
    assert rc == 0
    rep = json.load(open(out / "report.json"))
    assert {c["name"] for c in rep["certificates"]} == {
        "poincare", "elliptic_hopf", "mixed_vs_dirichlet"}
    assert all(c["verdict"] == "PASS" for c in rep["certificates"])
    with open(out / "summary.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["certificate", "constant", "verdict"]
    assert len(rows) == 4


def _write(tmp_path, text):
    p = tmp_path / "cfg.ini"
    p.write_text(text)
    return str(p)


def test_reports_value_identical_across_runs(tmp_path):
    cfg = load_config(SMALL.format(out=tmp_path / "out"))
    run("verify", cfg)
    d1 = json.load(open(tmp_path / "out" / "report.json"))
    run("verify", load_config(SMALL.format(out=tmp_path / "out")))
    d2 = json.load(open(tmp_path / "out" / "report.json"))
    d1.pop("timing_s"), d2.pop("timing_s")
    assert d1 == d2


def test_field_csv_bit_identical(tmp_path):
    for sub in ("a", "b"):
        cfg = load_config(SMALL.format(out=tmp_path / sub))
        run("solve", cfg)
    a = (tmp_path / "a" / "fields" / "xi0.csv").read_bytes()
    b = (tmp_path / "b" / "fields" / "xi0.csv").read_bytes()
    assert a == b


def test_config_digest_ignores_line_order():
    c1 = load_config("[partition]\ns = 0.5\nomega = -1:1\n[mesh]\nn_omega = 8,12\nn_sigma2=4,4\n")
    c2 = load_config("[mesh]\nn_omega = 8,12\nn_sigma2=4,4\n[partition]\nomega = -1:1\ns = 0.5\n")
    assert c1.digest() == c2.digest()


def test_seed_override(tmp_path):
    cfg = load_config(SMALL.format(out=tmp_path / "out"), seed_override=7)
    assert cfg.family.seed == 7
    assert cfg.walker_spec["seed"] == 7


def test_walk_subcommand(tmp_path):
    text = SMALL.format(out=tmp_path / "out").replace(
        "requested = poincare, elliptic_hopf, comparison",
        "requested = walker_duality")
    cfg = load_config(text)
    rep = run("walk", cfg)
    assert rep.all_pass
    assert rep.certificates[0].name == "walker_duality"


def test_parabolic_subcommand(tmp_path):
    cfg = load_config(SMALL.format(out=tmp_path / "out"))
    rep = run("parabolic", cfg)
    path = tmp_path / "out" / "fields" / "trajectory.csv"
    assert path.exists()
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    assert header == ["x", "value", "t"]
