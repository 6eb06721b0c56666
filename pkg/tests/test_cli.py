import csv
import json

import numpy as np
import pytest

from growthcast import cli
from growthcast.data import write_long
from growthcast.store import read_draws
from growthcast.synthetic import make_panel

SAMPLER = {"sweeps": 60, "burn_in": 30, "thin": 1, "chains": 2, "seed": 4}


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    panel, _ = make_panel(3, N=3, T=30, p=2, alpha=(3000.0, 0.25, 15.0), sd=(200.0, 0.02, 2.0))
    write_long(panel.trajectories, root / "traj.csv")
    with open(root / "cov.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", *panel.covariates.names])
        for u, row in zip(panel.covariates.unit_ids, panel.covariates.raw):
            w.writerow([u, *(repr(float(v)) for v in row)])
    cfg = {"trajectories": str(root / "traj.csv"), "covariates": str(root / "cov.csv"),
           "sampler": SAMPLER}
    (root / "cfg.json").write_text(json.dumps(cfg), encoding="utf-8")
    return root


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_fit_outputs_and_determinism(files):
    a, b = files / "fitA", files / "fitB"
    assert cli.main(["fit", "--config", str(files / "cfg.json"), "--out", str(a)]) == 0
    assert cli.main(["fit", "--config", str(files / "cfg.json"), "--out", str(b)]) == 0
    for name in ("draws.csv", "summary.csv", "diagnostics.csv"):
        assert (a / name).exists()
    assert (a / "draws.csv").read_bytes() == (b / "draws.csv").read_bytes()
    draws, meta = read_draws(a / "draws.csv")
    assert len(draws) == 2 * 30 and meta["seed"] == 4
    assert _rows(a / "summary.csv")[0] == ["parameter", "mean", "lower", "upper"]


def test_seed_flag_changes_draws(files):
    out = files / "fitC"
    assert cli.main(["fit", "--config", str(files / "cfg.json"), "--seed", "5", "--out", str(out)]) == 0
    assert (out / "draws.csv").read_bytes() != (files / "fitA" / "draws.csv").read_bytes()


def test_dotted_override(files):
    _, cfg = cli.parse_args(["fit", "--config", str(files / "cfg.json"), "--sampler.sweeps", "80",
                             "--evaluate.test_days", "2,4", "--gamma", "0.5,0.9"])
    assert cfg.sampler.sweeps == 80 and cfg.test_days == (2, 4) and cfg.gamma == (0.5, 0.9)


def test_predict_outputs(files):
    out = files / "pred"
    argv = ["predict", "--config", str(files / "cfg.json"), "--draws", str(files / "fitA" / "draws.csv"),
            "--horizon", "5", "--out", str(out)]
    assert cli.main(argv) == 0
    fc = _rows(out / "forecast_unit01.csv")
    assert fc[0] == ["t", "date", "mean", "lower", "upper"] and len(fc) == 1 + 35
    assert fc[1][1] == "2020-01-22"
    flat = _rows(out / "flat_times.csv")
    assert flat[0] == ["unit", "gamma", "mean_day", "mean_date", "lower", "upper"]
    assert len(flat) == 1 + 3 * 4
    sizes = _rows(out / "final_size.csv")
    assert {r[4] for r in sizes[1:]} <= {"1", "2", "3"}
    assert (out / "grand_average.csv").exists()


def test_predict_horizon_zero(files):
    out = files / "pred0"
    assert cli.main(["predict", "--draws", str(files / "fitA" / "draws.csv"), "--out", str(out)]) == 0
    assert len(_rows(out / "forecast_unit02.csv")) == 1 + 30


def test_predict_spec_mismatch(files):
    assert cli.main(["predict", "--draws", str(files / "fitA" / "draws.csv"), "--model", "m2",
                     "--out", str(files / "x")]) == 2


def test_rank(files):
    out = files / "rank"
    assert cli.main(["rank", "--draws", str(files / "fitA" / "draws.csv"), "--out", str(out)]) == 0
    for l in (1, 2, 3):
        rows = _rows(out / f"rank_theta{l}.csv")
        assert rows[0] == ["rank", "covariate", "posterior_mean"] and len(rows) == 3
    first = (out / "rank_theta1.csv").read_bytes()
    cli.main(["rank", "--draws", str(files / "fitA" / "draws.csv"), "--out", str(out)])
    assert (out / "rank_theta1.csv").read_bytes() == first


def test_variant_contracts(files):
    traj = str(files / "traj.csv")
    assert cli.main(["fit", "--trajectories", traj, "--model", "m3", "--out", str(files / "m3")]) == 2
    assert cli.main(["fit", "--trajectories", traj, "--model", "m2", "--sampler.sweeps", "20",
                     "--sampler.burn_in", "10", "--sampler.chains", "1", "--out", str(files / "m2")]) == 0
    assert cli.main(["fit", "--trajectories", traj, "--model", "m1", "--out", str(files / "m1")]) == 2
    assert cli.main(["fit", "--trajectories", traj, "--model", "m1", "--unit", "unit02",
                     "--sampler.sweeps", "20", "--sampler.burn_in", "10", "--sampler.chains", "1",
                     "--out", str(files / "m1")]) == 0


def test_config_errors(files, tmp_path):
    assert cli.main(["fit", "--trajectories", str(tmp_path / "none.csv")]) == 2
    assert cli.main(["fit", "--config", str(files / "cfg.json"), "--bogus", "1"]) == 2
    assert cli.main(["fit", "--config", str(files / "cfg.json"), "--gamma", "1.5"]) == 2
    assert cli.main(["predict", "--out", str(tmp_path)]) == 2


def test_evaluate_smoke_matches_library(files):
    out = files / "ev"
    argv = ["evaluate", "--config", str(files / "cfg.json"), "--evaluate.test_days", "2",
            "--evaluate.replicates", "1", "--out", str(out)]
    assert cli.main(argv) == 0
    assert (out / "mse.csv").exists() and (out / "box_stats.csv").exists()
    from growthcast.data import load_panel
    from growthcast.evaluation import compare_models
    from growthcast.gibbs import SamplerConfig
    panel = load_panel(files / "traj.csv", covariates=files / "cov.csv")
    rep = compare_models(panel, (2,), 1, 0, SamplerConfig(**SAMPLER))
    lib = files / "lib"
    lib.mkdir()
    rep.write_csv(lib / "mse.csv", lib / "box.csv")
    assert (lib / "mse.csv").read_bytes() == (out / "mse.csv").read_bytes()


def test_evaluate_needs_covariates_for_m3(files):
    assert cli.main(["evaluate", "--trajectories", str(files / "traj.csv"), "--evaluate.test_days", "2",
                     "--out", str(files / "e2")]) == 2


def test_chain_failure_exit_code(files, monkeypatch):
    from growthcast.errors import ChainError

    def boom(*a, **k):
        raise ChainError("synthetic failure", 4, 0)
    monkeypatch.setattr(cli, "run_chains", boom)
    assert cli.main(["fit", "--config", str(files / "cfg.json"), "--out", str(files / "f")]) == 3
