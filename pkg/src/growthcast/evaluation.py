"""Forecast comparison of the three model variants on held-out days.

For each test-window length d every trajectory is split into its first T-d
and last d days; models are fitted on the former and scored by the mean
squared error of the posterior mean curve over the latter. Replicates rerun
the fits with seeds ``base_seed + r`` on the same split.
"""
import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ChainError, ContractError, DomainError
from .gibbs import SamplerConfig, run_chains, worker_count
from .inference import curve_draws
from .model import ModelSpec, Priors

log = logging.getLogger(__name__)

MODELS = ("M1", "M2", "M3")
DESK_TEST_DAYS = tuple(range(2, 29, 2))


def mse_d(actuals, forecasts):
    """Mean squared error over a K x d block of test points."""
    a = np.asarray(actuals, dtype=float)
    f = np.asarray(forecasts, dtype=float)
    if a.shape != f.shape:
        raise ContractError(f"shape mismatch: actuals {a.shape}, forecasts {f.shape}")
    if a.size == 0:
        raise ContractError("empty test block")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(f))):
        raise DomainError("actuals and forecasts must be finite")
    r = a - f
    return float(np.mean(r * r))


@dataclass(frozen=True)
class BoxStats:
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple = ()

    @property
    def iqr(self):
        return self.q3 - self.q1


def box_stats(values):
    """Quartiles, 1.5 IQR whiskers and outliers (Tukey box plot)."""
    x = np.sort(np.asarray(values, dtype=float).ravel())
    if x.size == 0:
        raise ContractError("box_stats needs at least one value")
    q1, med, q3 = np.percentile(x, [25.0, 50.0, 75.0])
    lo_fence = q1 - 1.5 * (q3 - q1)
    hi_fence = q3 + 1.5 * (q3 - q1)
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    outliers = tuple(float(v) for v in x if v < lo_fence or v > hi_fence)
    return BoxStats(float(q1), float(med), float(q3), float(inside.min()), float(inside.max()),
                    outliers)


@dataclass
class MseReport:
    """MSE per (model, d, replicate) cell, with box statistics per (model, d)."""

    test_days: tuple
    replicates: int
    models: tuple
    cells: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def values(self, model, d):
        return [self.cells[(model, d, r)] for r in range(self.replicates)
                if (model, d, r) in self.cells]

    def box(self, model, d):
        vals = self.values(model, d)
        return box_stats(vals) if vals else None

    def median(self, model, d):
        vals = self.values(model, d)
        return float(np.median(vals)) if vals else float("nan")

    def write_csv(self, mse_path, box_path):
        with open(mse_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "d", "replicate", "mse"])
            for m in self.models:
                for d in self.test_days:
                    for r in range(self.replicates):
                        v = self.cells.get((m, d, r))
                        w.writerow([m, d, r, "" if v is None else repr(v)])
        with open(box_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "d", "n", "q1", "median", "q3", "whisker_low", "whisker_high",
                        "outliers"])
            for m in self.models:
                for d in self.test_days:
                    b = self.box(m, d)
                    if b is None:
                        w.writerow([m, d, 0, "", "", "", "", "", ""])
                        continue
                    w.writerow([m, d, len(self.values(m, d)), repr(b.q1), repr(b.median),
                                repr(b.q3), repr(b.whisker_low), repr(b.whisker_high),
                                ";".join(repr(v) for v in b.outliers)])


def _mean_forecast(draws, unit, times):
    return curve_draws(draws.unit_params(unit), times).mean(axis=0)


def forecast_cell(train_data, test_y, model, config, priors=Priors()):
    """Posterior-mean forecasts (K, d) of one model fitted on ``train_data``."""
    d = test_y.shape[1]
    T = train_data.T
    times = np.arange(T + 1, T + d + 1, dtype=float)
    if model == "M1":
        rows = []
        for u in train_data.unit_ids:
            draws = run_chains(train_data, ModelSpec("M1", u), config, priors)
            rows.append(_mean_forecast(draws, u, times))
        return np.array(rows)
    draws = run_chains(train_data, ModelSpec(model), config, priors)
    return np.array([_mean_forecast(draws, u, times) for u in train_data.unit_ids])


def _cell_job(args):
    train_data, test_y, model, d, r, config, priors = args
    try:
        pred = forecast_cell(train_data, test_y, model, config, priors)
        return model, d, r, mse_d(test_y, pred), None
    except (ChainError, DomainError, ContractError) as exc:
        return model, d, r, None, str(exc)


def compare_models(data, test_days=DESK_TEST_DAYS, replicates=5, base_seed=0, config=None,
                   models=MODELS, priors=Priors()):
    """Fit every model on every split and replicate; returns an MseReport.

    Failed cells are logged, recorded in ``failures`` and left out.
    """
    config = config or SamplerConfig.desk()
    test_days = tuple(int(d) for d in test_days)
    models = tuple(m.upper() for m in models)
    if not test_days or replicates < 1:
        raise DomainError("need at least one test-day count and one replicate")
    if max(test_days) >= data.T:
        raise DomainError(f"largest d={max(test_days)} must be smaller than T={data.T}")
    unknown = set(models) - set(MODELS)
    if unknown:
        raise ContractError(f"unknown models {sorted(unknown)}")
    if "M3" in models and data.covariates is None:
        raise ContractError("M3 needs covariates")
    full = data.model_data()
    workers = worker_count(config.workers)
    inner = replace(config, workers=1) if workers > 1 else config
    jobs = []
    for d in test_days:
        train = data.train(d).model_data()
        test_y = full.y[:, full.T - d:]
        for r in range(replicates):
            cfg = replace(inner, seed=base_seed + r)
            jobs += [(train, test_y, m, d, r, cfg, priors) for m in models]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]
    report = MseReport(test_days, replicates, models)
    for model, d, r, value, err in results:
        if err is None:
            report.cells[(model, d, r)] = value
        else:
            log.warning("cell %s d=%d replicate %d failed: %s", model, d, r, err)
            report.failures.append((model, d, r, err))
    return report
