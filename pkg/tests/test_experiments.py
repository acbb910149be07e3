import hashlib
import json

import numpy as np
import pytest

from nibridge import cli
from nibridge.experiments import (EXPERIMENTS, decay_discrepancy, make_config, rejection_oracle,
                                  rigidity_locations, run_experiment, write_report)
from nibridge.freeconv import rho_sc
from nibridge.sampling import BoundaryData, TimeGrid

SMALL = {
    "concentration": {"ns": [20, 40], "samples": 4, "steps": 4, "slope_max": 10.0},
    "rigidity": {"n": 40, "runs": 2, "times": [0.5], "width": 3, "nodes": 512, "min_fraction": 0.0},
    "bulk-stats": {"n": 60, "replicas": 4, "functions": ["gaussian"], "poisson_length": 10.0},
    "decay": {"Ls": [2, 4], "cells": 6, "ratio_max": 1.0},
    "glauber-mixing": {"draws": 2000, "chunks": 2, "checkpoints": [1, 5], "ks_max": 0.2,
                       "ks_trivial": 0.1},
    "height-variance": {"n": 20, "samples": 10, "times": [0.5], "ys": [0.3, 0.7]},
    "coupling": {"replicas": 4, "updates": 2000},
}


def small(name, **kw):
    return make_config(name, {k: v for k, v in SMALL[name].items()}, **kw)


def test_registry_covers_all_subcommands():
    assert set(EXPERIMENTS) == {"concentration", "rigidity", "bulk-stats", "decay",
                                "glauber-mixing", "height-variance", "coupling"}
    assert set(SMALL) == set(EXPERIMENTS)


@pytest.mark.parametrize("name", sorted(SMALL))
def test_small_runs_produce_complete_artifacts(name, tmp_path):
    report = run_experiment(small(name))
    assert report.criteria and report.wall_clock > 0
    manifest = write_report(report, tmp_path)
    files = {p.name for p in tmp_path.iterdir()}
    assert {"report.json", "schema.txt", "manifest.json"} <= files
    for fname, digest in manifest["checksums"].items():
        assert hashlib.sha256((tmp_path / fname).read_bytes()).hexdigest() == digest
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["calibration"] and data["config"]["experiment"] == name
    assert set(manifest["criteria"]) == {c.name for c in report.criteria}
    assert manifest["replica_seeds"] == report.replica_seeds
    for table in report.tables:
        assert f"{table}.csv" in files
        assert f"{table}.csv" in (tmp_path / "schema.txt").read_text()


@pytest.mark.parametrize("name", ["concentration", "bulk-stats", "height-variance"])
def test_same_seed_gives_identical_artifacts(name, tmp_path):
    digests = []
    for i, workers in enumerate((1, 1, 2)):
        out = tmp_path / str(i)
        write_report(run_experiment(small(name, seed=77, workers=workers)), out)
        digests.append({p.name: p.read_bytes() for p in out.iterdir()
                        if p.name != "manifest.json"})
    assert digests[0] == digests[1]
    # replica streams do not depend on scheduling; only the worker echo differs
    for fname in digests[0]:
        if fname != "report.json":
            assert digests[0][fname] == digests[2][fname]
    other = tmp_path / "other"
    write_report(run_experiment(small(name, seed=78)), other)
    assert any((other / f).read_bytes() != b for f, b in digests[0].items() if f.endswith(".csv"))


def test_rigidity_degenerate_cases():
    r = run_experiment(make_config("rigidity", {"n": 10, "width": 5}))
    assert r.summary["fraction"] == 1.0 and r.passed
    r0 = run_experiment(make_config("rigidity", {"n": 40, "runs": 2, "times": [0.0], "width": 3}))
    assert r0.summary["fraction"] == 1.0


def test_rigidity_locations_for_point_mass():
    gam = rigidity_locations(101, [0.0, 0.0], 1.0, nodes=2048)
    assert gam[50] == pytest.approx(0.0, abs=1e-6)
    assert np.all(np.diff(gam) < 0)
    # upper tail mass above gamma_j is (j - 1/2)/n under the semicircle
    x = np.linspace(gam[10], 2.0, 20001)
    assert np.trapezoid(rho_sc(x, 1.0), x) == pytest.approx(10.5 / 101, abs=1e-4)


def test_height_variance_above_all_paths_is_zero():
    r = run_experiment(small("height-variance"))
    crit = {c.name: c for c in r.criteria}
    assert crit["above_all_paths"].passed and crit["above_all_paths"].value == 0.0


def test_concentration_single_path_and_shift():
    r = run_experiment(make_config("concentration", {"ns": [1], "samples": 5, "steps": 4}))
    assert np.isfinite(r.summary["per_n"][1]["median"]) and r.summary["per_n"][1]["median"] > 0
    s = run_experiment(make_config("concentration", {"ns": [30], "samples": 5, "steps": 4,
                                                     "shift": 0.05}))
    crit = {c.name: c for c in s.criteria}
    assert crit["shift_additivity_n30"].passed


def test_decay_identical_data_and_doubling():
    kw = dict(beta=0.3, d=0.5, window=0.5, cells=6, eps=0.05, tol=1e-8)
    m0, _ = decay_discrepancy(2, 0.0, **kw)
    assert m0 <= 2e-8
    m1, _ = decay_discrepancy(2, 0.05, **kw)
    m2, _ = decay_discrepancy(2, 0.1, **kw)
    assert 0 < m1 and m2 <= 2 * m1 + 1e-6


def test_rejection_oracle_free_bridge():
    grid = TimeGrid(0.0, 2.0, 2)
    bd = BoundaryData([0.0], [0.0], sigma=1.0)
    samples, acc = rejection_oracle(bd, grid, 4000, np.random.default_rng(0))
    assert acc == pytest.approx(1.0)
    assert samples.shape[0] == 4000
    assert np.std(samples.reshape(4000, -1)[:, 0]) == pytest.approx(np.sqrt(0.5), abs=0.04)


def test_overconstrained_mixing_instance_is_rejected():
    r = run_experiment(make_config("glauber-mixing", {"lower": -0.01, "upper": 0.01,
                                                      "u": [0.005, -0.005], "v": [0.005, -0.005],
                                                      "draws": 1000, "chunks": 1}))
    crit = {c.name: c for c in r.criteria}
    assert not crit["oracle_acceptance"].passed and not r.passed


# ---------------------------------------------------------------- command line

def test_cli_exit_codes(tmp_path, capsys):
    out = tmp_path / "cpl"
    rc = cli.main(["coupling", "--seed", "3", "--out", str(out), "--replicas", "2",
                   "--updates=500"])
    assert rc == 0
    assert (out / "manifest.json").exists()
    text = capsys.readouterr().out
    assert "PASS" in text and "coupling: PASS" in text
    rc = cli.main(["rigidity", "--n", "40", "--runs", "1", "--times", "0.5", "--width", "3",
                   "--nodes", "256", "--min-fraction", "1.01"])
    assert rc == 1


def test_cli_config_file_and_errors(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("replicas = 2\nupdates = 300\nseed = 4\n")
    assert cli.main(["coupling", "--config", str(cfg)]) == 0
    with pytest.raises(SystemExit) as e:
        cli.main(["coupling", "--bogus", "1"])
    assert e.value.code == 2
    with pytest.raises(SystemExit):
        cli.main(["coupling", "--updates"])
    with pytest.raises(SystemExit):
        cli.main(["nonsense"])
