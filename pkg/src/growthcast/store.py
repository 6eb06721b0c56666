"""Draws on disk: a columnar CSV plus a JSON sidecar.

The CSV has one row per retained draw (``chain`` first, then one column per
scalar). Floats are written with ``repr`` so a reload is exact and reruns
with the same seed produce identical bytes.
"""
import csv
import datetime as dt
import json
import subprocess
from pathlib import Path

import numpy as np

from .errors import ContractError
from .gibbs import PosteriorDraws, SamplerConfig, _scalar_layout
from .model import ModelData, ModelSpec


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def git_describe():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def write_draws(draws, path, start_date=None, extra=None):
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["chain"] + list(draws.names))
        for c, row in zip(draws.chain, draws.values):
            w.writerow([str(int(c))] + [repr(float(v)) for v in row])
    meta = {
        "spec": {"variant": draws.spec.variant, "unit": draws.spec.unit},
        "seed": draws.config.seed,
        "config": draws.config.to_dict(),
        "unit_ids": list(draws.unit_ids),
        "covariate_names": list(draws.covariate_names),
        "T": int(np.asarray(draws.t).size),
        "start_date": start_date.isoformat() if start_date else None,
        "acceptance_rates": draws.acceptance_rates,
        "git_describe": git_describe(),
    }
    if extra:
        meta.update(extra)
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_meta(path):
    side = sidecar_path(path)
    if not side.exists():
        raise ContractError(f"missing metadata sidecar {side}")
    with open(side, encoding="utf-8") as fh:
        return json.load(fh)


def read_draws(path):
    """Reload draws written by :func:`write_draws`; returns (draws, meta)."""
    meta = read_meta(path)
    spec = ModelSpec(meta["spec"]["variant"], meta["spec"].get("unit"))
    config = SamplerConfig(**meta["config"])
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "chain":
        raise ContractError(f"{path}: not a draws file")
    names = rows[0][1:]
    T = int(meta["T"])
    t = np.arange(1, T + 1, dtype=float)
    p = len(meta["covariate_names"])
    X = np.zeros((len(meta["unit_ids"]), p)) if spec.uses_covariates else None
    layout_data = ModelData(np.zeros((len(meta["unit_ids"]), T)), t, X,
                            tuple(meta["unit_ids"]), tuple(meta["covariate_names"]))
    if names != _scalar_layout(layout_data, spec):
        raise ContractError(f"{path}: columns do not match the recorded model")
    body = rows[1:]
    chain = np.array([int(r[0]) for r in body], dtype=int)
    values = np.array([[float(v) for v in r[1:]] for r in body], dtype=float).reshape(len(body), len(names))
    draws = PosteriorDraws(spec, config, names, values, chain, tuple(meta["unit_ids"]),
                           tuple(meta["covariate_names"]), t,
                           acceptance_rates=meta.get("acceptance_rates", {}))
    if meta.get("start_date"):
        meta["start_date"] = dt.date.fromisoformat(meta["start_date"])
    return draws, meta
