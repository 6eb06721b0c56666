"""growthcast command line: fit, predict, evaluate, rank.

Configuration is one JSON document (``--config``). Any field can be
overridden by a flag of the same dotted name, e.g. ``--sampler.sweeps 500``
or ``--evaluate.test_days 14,21``. Exit codes: 0 success, 2 bad
configuration or input, 3 sampler failure.
"""
import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from .data import DataFormatError, load_panel
from .errors import ChainError, ContractError, DomainError, KernelError
from .evaluation import DESK_TEST_DAYS, MODELS, compare_models
from .gibbs import SamplerConfig, run_chains
from .inference import (classify, day_to_date, extrapolate, final_size_summary,
                        flat_time_summary, grand_average_curve, rank_covariates, summarize)
from .model import ModelSpec
from .store import read_draws, write_draws

log = logging.getLogger("growthcast")

DEFAULT_GAMMAS = (0.9, 0.99, 0.999, 0.9999)


class ConfigError(ValueError):
    """Invalid configuration; exit code 2."""


@dataclass
class RunConfig:
    trajectories: str = None
    format: str = "long"
    covariates: str = None
    running_max: bool = False
    model: str = None
    unit: str = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    gamma: tuple = DEFAULT_GAMMAS
    horizon: int = 0
    level: float = 0.95
    out: str = "."
    draws: str = None
    l: int = None
    k: int = None
    test_days: tuple = DESK_TEST_DAYS
    replicates: int = 5
    base_seed: int = 0
    models: tuple = MODELS

    def validate(self, need_data=True):
        if need_data:
            if not self.trajectories:
                raise ConfigError("no trajectories file given")
            if not Path(self.trajectories).is_file():
                raise ConfigError(f"trajectories file not found: {self.trajectories}")
            if self.covariates and not Path(self.covariates).is_file():
                raise ConfigError(f"covariates file not found: {self.covariates}")
        if self.format not in ("long", "jhu_wide"):
            raise ConfigError(f"unknown format {self.format!r}")
        if any(not 0.0 < g < 1.0 for g in self.gamma):
            raise ConfigError("gamma values must lie in (0, 1)")
        if self.horizon < 0:
            raise ConfigError("horizon must be nonnegative")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        return self

    def spec(self):
        model = self.model or "M3"
        return ModelSpec(model, self.unit if model == "M1" else None)


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _listish(v, cast):
    if isinstance(v, str):
        v = [x for x in v.split(",") if x.strip()]
    if isinstance(v, (int, float)):
        v = [v]
    return tuple(cast(x) for x in v)


def _set_dotted(doc, key, value):
    parts = key.split(".")
    node = doc
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {key}: {part} is not a section")
    node[parts[-1]] = value


def build_config(doc):
    """RunConfig from a (possibly nested) dict."""
    doc = dict(doc)
    sampler = doc.pop("sampler", {}) or {}
    evaluate = doc.pop("evaluate", {}) or {}
    doc.update(evaluate)
    known = {f.name for f in fields(RunConfig)} - {"sampler"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    sampler_known = {f.name for f in fields(SamplerConfig)}
    if set(sampler) - sampler_known:
        raise ConfigError(f"unknown sampler fields: {sorted(set(sampler) - sampler_known)}")
    try:
        cfg = RunConfig(sampler=SamplerConfig(**sampler), **doc)
        cfg.gamma = _listish(cfg.gamma, float)
        cfg.test_days = _listish(cfg.test_days, int)
        cfg.models = _listish(cfg.models, lambda m: str(m).upper())
        cfg.horizon = int(cfg.horizon)
        cfg.model = str(cfg.model).upper() if cfg.model else None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _parser():
    p = argparse.ArgumentParser(prog="growthcast", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("fit", "predict", "evaluate", "rank"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON configuration file")
        s.add_argument("--seed", type=int)
        s.add_argument("--model", type=str.upper, choices=MODELS)
        s.add_argument("--unit")
        s.add_argument("--gamma", help="comma-separated list in (0, 1)")
        s.add_argument("--horizon", type=int)
        s.add_argument("--out")
        s.add_argument("--draws", help="draws CSV written by fit")
        s.add_argument("--l", type=int, choices=(1, 2, 3))
        s.add_argument("--k", type=int)
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_args(argv):
    args, rest = _parser().parse_known_args(argv)
    doc = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    i = 0
    while i < len(rest):
        flag = rest[i]
        if not flag.startswith("--") or len(flag) == 2:
            raise ConfigError(f"unexpected argument {flag!r}")
        key = flag[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(rest):
                raise ConfigError(f"flag {flag} needs a value")
            value = rest[i + 1]
            i += 2
        _set_dotted(doc, key.replace("-", "_"), _parse_value(value))
    if args.seed is not None:
        _set_dotted(doc, "sampler.seed", args.seed)
    for name in ("model", "unit", "gamma", "horizon", "out", "draws", "l", "k"):
        v = getattr(args, name)
        if v is not None:
            doc[name] = v
    return args, build_config(doc)


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _fmt(v):
    return repr(float(v))


def _load(cfg):
    return load_panel(cfg.trajectories, cfg.format, cfg.covariates, cfg.running_max)


def cmd_fit(cfg):
    cfg.validate()
    panel = _load(cfg)
    try:
        spec = cfg.spec()
    except ContractError as exc:
        raise ConfigError(str(exc)) from None
    if spec.uses_covariates and panel.covariates is None:
        raise ConfigError("model M3 needs a covariates file")
    if spec.variant == "M1" and spec.unit not in panel.unit_ids:
        raise ConfigError(f"unit {spec.unit!r} not in the data")
    draws = run_chains(panel.model_data(), spec, cfg.sampler)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_draws(draws, out / "draws.csv", panel.start_date)
    rows = []
    for k, name in enumerate(draws.names):
        s = summarize(draws.values[:, k], cfg.level)
        rows.append([name, _fmt(s.mean), _fmt(s.lower), _fmt(s.upper)])
    _write_rows(out / "summary.csv", ["parameter", "mean", "lower", "upper"], rows)
    rows = [[n, _fmt(r), _fmt(e)] for n, (r, e) in draws.diagnostics.items()]
    rows += [[f"{n}/acceptance", "", _fmt(a)] for n, a in draws.acceptance_rates.items()]
    _write_rows(out / "diagnostics.csv", ["parameter", "rhat", "ess"], rows)
    bad = [n for n, (r, _) in draws.diagnostics.items() if r > 1.05]
    if bad:
        log.warning("%d scalars have split R-hat above 1.05", len(bad))
    return draws


def cmd_predict(cfg):
    cfg.validate(need_data=False)
    if not cfg.draws:
        raise ConfigError("predict needs --draws")
    draws, meta = read_draws(cfg.draws)
    if cfg.model and draws.spec.variant != cfg.model:
        raise ConfigError(f"draws were fitted with {draws.spec.variant}, config says {cfg.model}")
    start = meta.get("start_date")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    units = draws.unit_ids
    if cfg.unit is not None:
        if cfg.unit not in units:
            raise ConfigError(f"unit {cfg.unit!r} not in draws")
        units = (cfg.unit,)
    date = (lambda d: day_to_date(start, d).isoformat()) if start else (lambda d: "")
    flat, sizes = [], []
    for u in units:
        band = extrapolate(draws, u, cfg.horizon, level=cfg.level)
        _write_rows(out / f"forecast_{u}.csv", ["t", "date", "mean", "lower", "upper"],
                    [[int(t), date(t), _fmt(m), _fmt(lo), _fmt(hi)]
                     for t, m, lo, hi in zip(band.times, band.mean_curve, band.lower_curve,
                                             band.upper_curve)])
        for g in cfg.gamma:
            s = flat_time_summary(draws, u, g, cfg.level)
            flat.append([u, repr(g), _fmt(s.mean), date(s.mean), _fmt(s.lower), _fmt(s.upper)])
        s = final_size_summary(draws, u, cfg.level)
        sizes.append([u, _fmt(s.mean), _fmt(s.lower), _fmt(s.upper), classify(s.mean).level])
    _write_rows(out / "flat_times.csv", ["unit", "gamma", "mean_day", "mean_date", "lower", "upper"],
                flat)
    _write_rows(out / "final_size.csv", ["unit", "mean", "lower", "upper", "level"], sizes)
    band = grand_average_curve(draws, cfg.horizon, level=cfg.level)
    _write_rows(out / "grand_average.csv", ["t", "date", "mean", "lower", "upper"],
                [[int(t), date(t), _fmt(m), _fmt(lo), _fmt(hi)]
                 for t, m, lo, hi in zip(band.times, band.mean_curve, band.lower_curve,
                                         band.upper_curve)])
    return out


def cmd_evaluate(cfg):
    cfg.validate()
    panel = _load(cfg)
    if "M3" in cfg.models and panel.covariates is None:
        raise ConfigError("model M3 in the comparison needs a covariates file")
    report = compare_models(panel, cfg.test_days, cfg.replicates, cfg.base_seed, cfg.sampler,
                            cfg.models)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "mse.csv", out / "box_stats.csv")
    return report


def cmd_rank(cfg):
    cfg.validate(need_data=False)
    if not cfg.draws:
        raise ConfigError("rank needs --draws")
    draws, _ = read_draws(cfg.draws)
    if not draws.spec.uses_covariates:
        raise ConfigError(f"draws from {draws.spec.variant} have no coefficients")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for l in ((cfg.l,) if cfg.l else (1, 2, 3)):
        ranked = rank_covariates(draws, l, cfg.k or min(10, draws.p))
        path = out / f"rank_theta{l}.csv"
        _write_rows(path, ["rank", "covariate", "posterior_mean"],
                    [[r + 1, name, _fmt(m)] for r, (name, m) in enumerate(ranked)])
        written.append(path)
    return written


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "evaluate": cmd_evaluate, "rank": cmd_rank}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args, cfg = parse_args(argv)
    except ConfigError as exc:
        print(f"growthcast: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](cfg)
    except (ChainError, KernelError) as exc:
        print(f"growthcast: sampler failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ContractError, DomainError, DataFormatError, OSError) as exc:
        print(f"growthcast: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
