#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Batch front end: simulate -> fit -> calibrate -> audit.

    autocal report --out runs/univariate --seed 1 --n 10000
    autocal fit --data runs/univariate/data.csv --models glm,bst --out runs/fits
    autocal dominance --data data.csv --scores scores_glm.csv scores_glm_bc.csv --out runs/dom

Every subcommand splits the rows by a seeded permutation into disjoint train / smoothing /
validation sets (default 60/20/20). Scorers only see train rows, the correction only sees
smoothing rows and every audit runs on validation rows.
"""

import os
import sys
import argparse
from contextlib import contextmanager
from dataclasses import dataclass, asdict
from typing import Optional, Tuple
import numpy as np
import pandas as pd
from rich.table import Table
from autocal_tools.autocal import (
    BandwidthSpec, CalibrationMap, Kernel, autocalibrate, calibration_curve, global_balance_correction,
)
from autocal_tools.curves import (
    DEFAULT_SWEEP_GRID, alpha_sweep, bias, cc_density, concentration_curve, empirical_poisson_loss,
    qq_pairs, score_summary, spearman,
)
from autocal_tools.exceptions import DataError, DomainError, NumericError, UsageError, DegenerateError
from autocal_tools.learners import (
    default_gam_basis, fit_boost, fit_glm_dataset, identity_basis, predict_boost, predict_glm, true_mean_basis,
)
from autocal_tools.logprint import LogPrint
from autocal_tools.ordering import DEFAULT_XI_GRID, check_dominance, convex_order_check
from autocal_tools.portfolio import ingest, read_scores, split_indices, write_dataset, write_scores
from autocal_tools.simdata import Shape, SimConfig, distort, simulate
from autocal_tools.tweedie import mean_deviance
from autocal_tools.utils import get_setting, read_config, write_frame, write_json

SUBCOMMANDS = ("simulate", "fit", "calibrate", "dominance", "curves", "sweep", "report")
MODELS = ("glm", "gam", "true", "bst", "bst_overfit")
DEFAULT_MODELS = ("glm", "gam", "bst", "bst_overfit")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _as_tuple(value, cast):
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    return tuple(cast(v.strip() if isinstance(v, str) else v) for v in value)


@dataclass(frozen=True)
class RunConfig:
    """
    One CLI run.

    Args:
        subcommand (str): one of SUBCOMMANDS.
        out (str): output directory.
        data (str): portfolio CSV; simulate/fit/sweep/report simulate one when omitted.
        scores (tuple): score CSVs (row_id,score) for calibrate, dominance and curves.
        seed (int): drives simulation, the split and the bootstrap.
        split (tuple): train / smoothing / validation fractions.
        models (tuple): scorers fitted by fit, sweep and report.
        kernel, alpha0, alpha1, monotone: autocalibration smoother.
        xi_grid (tuple): Tweedie powers for deviances and dominance.
        distort (tuple): optional (kind, param) applied to every fitted scorer.
    """
    subcommand: str
    out: str
    data: Optional[str] = None
    scores: Tuple[str, ...] = ()
    seed: int = 42
    n: int = 10_000
    shape: str = Shape.UNIVARIATE.value
    split: Tuple[float, float, float] = (0.6, 0.2, 0.2)
    models: Tuple[str, ...] = DEFAULT_MODELS
    kernel: str = Kernel.RECTANGULAR.value
    alpha0: float = 0.05
    alpha1: float = 0.0
    monotone: bool = False
    xi_grid: Tuple[float, ...] = DEFAULT_XI_GRID
    alpha0_grid: Tuple[float, ...] = tuple(DEFAULT_SWEEP_GRID)
    n_boot: int = 200
    distort: Optional[Tuple[str, float]] = None
    verbose: bool = True

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise UsageError(f"unknown subcommand '{self.subcommand}'")
        if len(self.split) != 3 or any(f <= 0 for f in self.split):
            raise UsageError(f"split fractions must be three positive numbers, got {self.split}")
        if sum(self.split) > 1 + 1e-12:
            raise UsageError(f"split fractions {self.split} sum to more than 1")
        unknown = [m for m in self.models if m not in MODELS]
        if unknown or not self.models:
            raise UsageError(f"unknown models {unknown}, choose from {MODELS}")
        try:
            Kernel(self.kernel)
            Shape(self.shape)
        except ValueError as e:
            raise UsageError(str(e))
        BandwidthSpec(self.alpha0, self.alpha1)
        if self.data is not None and not os.path.isfile(self.data):
            raise UsageError(f"Input file not found: {self.data}")
        for fp in self.scores:
            if not os.path.isfile(fp):
                raise UsageError(f"Score file not found: {fp}")
        if self.n_boot < 0:
            raise UsageError(f"n_boot must be >= 0, got {self.n_boot}")

    @property
    def bandwidth(self):
        return BandwidthSpec(self.alpha0, self.alpha1)

    def to_dict(self):
        """Settings that determine the results; paths and verbosity are left out."""
        d = asdict(self)
        for key in ["out", "data", "scores", "verbose"]:
            d.pop(key)
        return d


@contextmanager
def _stage(name, logger):
    logger.print(f"[{name}]", "cyan")
    try:
        yield
    except Exception as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise


def _stem(fp):
    return os.path.splitext(os.path.basename(fp))[0]


def _load_dataset(cfg, logger, simulate_if_missing=True):
    if cfg.data is not None:
        return ingest(cfg.data, logger=logger)
    if not simulate_if_missing:
        raise UsageError(f"'{cfg.subcommand}' needs --data")
    return simulate(SimConfig(n=cfg.n, seed=cfg.seed, shape=Shape(cfg.shape)))


def _load_scores(cfg, n_rows):
    scores = {}
    for fp in cfg.scores:
        s = read_scores(fp)
        if len(s) != n_rows:
            raise DataError(f"{fp}: {len(s)} scores for {n_rows} data rows")
        scores[_stem(fp)] = s
    return scores


def _fit_one(model, train, dataset, cfg, logger):
    """Fit on the training rows, score every row. Returns (fit description, scores)."""
    if model == "glm":
        fit = fit_glm_dataset(train, identity_basis(train.features.shape[1]), logger=logger)
        scores = predict_glm(fit, dataset.features)
    elif model == "gam":
        fit = fit_glm_dataset(train, default_gam_basis(train.features), logger=logger)
        scores = predict_glm(fit, dataset.features)
    elif model == "true":
        if train.features.shape[1] != 1:
            raise UsageError("the 'true' model is the univariate linear spline, data has several features")
        fit = fit_glm_dataset(train, true_mean_basis(), logger=logger)
        scores = predict_glm(fit, dataset.features)
    else:
        n_trees = 30 if model == "bst" else 1000
        min_leaf = 20 if model == "bst" else 1
        fit = fit_boost(train.y, train.exposure, train.features, n_trees=n_trees, shrinkage=0.1,
                        min_leaf=min_leaf, verbose=cfg.verbose, logger=logger)
        scores = predict_boost(fit, dataset.features)
    if cfg.distort is not None:
        scores = distort(scores, cfg.distort[0], cfg.distort[1])
    return fit.to_dict(), scores


def _fit_models(dataset, train_idx, cfg, logger):
    train = dataset.subset(train_idx)
    fits, scores = {}, {}
    for model in cfg.models:
        fits[model], scores[model] = _fit_one(model, train, dataset, cfg, logger)
    return fits, scores


def _curve_frame(x_name, x, values):
    return pd.DataFrame({x_name: np.asarray(x, dtype=np.float64), "value": np.asarray(values, dtype=np.float64)})


def run_simulate(cfg, logger):
    with _stage("simulate", logger):
        dataset = simulate(SimConfig(n=cfg.n, seed=cfg.seed, shape=Shape(cfg.shape)))
        write_dataset(dataset, os.path.join(cfg.out, "data.csv"))
    return {"files": ["data.csv"], "n_rows": dataset.n_rows}


def run_fit(cfg, logger):
    with _stage("ingest", logger):
        dataset = _load_dataset(cfg, logger)
    with _stage("split", logger):
        train_idx, _, _ = split_indices(dataset.n_rows, cfg.split, cfg.seed)
    files = []
    with _stage("fit", logger):
        fits, scores = _fit_models(dataset, train_idx, cfg, logger)
        for model in cfg.models:
            write_json(fits[model], os.path.join(cfg.out, f"fit_{model}.json"))
            write_scores(scores[model], os.path.join(cfg.out, f"scores_{model}.csv"))
            files += [f"fit_{model}.json", f"scores_{model}.csv"]
    return {"files": files}


def run_calibrate(cfg, logger):
    with _stage("ingest", logger):
        dataset = _load_dataset(cfg, logger, simulate_if_missing=False)
        scores = _load_scores(cfg, dataset.n_rows)
        if not scores:
            raise UsageError("calibrate needs at least one --scores file")
    with _stage("split", logger):
        _, smooth_idx, valid_idx = split_indices(dataset.n_rows, cfg.split, cfg.seed)
    files, summary = [], {}
    with _stage("calibrate", logger):
        for name, s in scores.items():
            cmap = CalibrationMap(s[smooth_idx], dataset.y[smooth_idx], dataset.exposure[smooth_idx],
                                  kernel=cfg.kernel, bandwidth=cfg.bandwidth,
                                  monotone_projection=cfg.monotone, logger=logger)
            corrected = np.atleast_1d(cmap.evaluate(s))
            write_scores(corrected, os.path.join(cfg.out, f"{name}_bc.csv"))
            files.append(f"{name}_bc.csv")
            departure = calibration_curve(corrected[valid_idx], dataset.y[valid_idx],
                                          dataset.exposure[valid_idx], logger=logger).departure
            summary[name] = {"global_rate": cmap.global_rate,
                             "mean_corrected": float(np.mean(corrected[valid_idx])),
                             "departure": None if np.isnan(departure) else departure}
        write_json({"scores": summary, "files": files}, os.path.join(cfg.out, "calibrate.json"))
    return {"files": files + ["calibrate.json"], "scores": summary}


def run_dominance(cfg, logger):
    with _stage("ingest", logger):
        dataset = _load_dataset(cfg, logger, simulate_if_missing=False)
        scores = _load_scores(cfg, dataset.n_rows)
        if len(scores) != 2:
            raise UsageError("dominance compares exactly two score files")
    with _stage("split", logger):
        _, _, valid_idx = split_indices(dataset.n_rows, cfg.split, cfg.seed)
    with _stage("dominance", logger):
        (_, s1), (_, s2) = scores.items()
        valid = dataset.subset(valid_idx)
        report = check_dominance(valid.y, valid.exposure, s1[valid_idx], s2[valid_idx], xi_grid=cfg.xi_grid)
        write_frame(_curve_frame("xi", report.xi_grid, report.psi_gap), os.path.join(cfg.out, "psi_gap.csv"))
        write_frame(_curve_frame("t", report.t_grid, report.lpm_gap), os.path.join(cfg.out, "lpm_gap.csv"))
        write_frame(_curve_frame("xi", report.xi_grid, report.deviance_gap),
                    os.path.join(cfg.out, "deviance_gap.csv"))
        files = ["psi_gap.csv", "lpm_gap.csv", "deviance_gap.csv"]
        payload = {"scores1": _stem(cfg.scores[0]), "scores2": _stem(cfg.scores[1]),
                   "dominance": report.to_dict(), "files": files}
        write_json(payload, os.path.join(cfg.out, "dominance.json"))
    logger.print(f"cond1 {report.cond1_holds}, cond2 {report.cond2_holds}, sufficient {report.sufficient}")
    return payload


def _write_curves(name, y, e, scores, mu, out, logger):
    """Concentration curve, its density and the calibration curve of one scorer; returns file names."""
    cc = concentration_curve(y, scores)
    files = {f"cc_{name}.csv": cc.to_frame(),
             f"cc_density_{name}.csv": cc_density(cc).to_frame()}
    if mu is not None:
        files[f"cc_true_{name}.csv"] = concentration_curve(mu, scores).to_frame()
    curve = calibration_curve(scores, y, e, logger=logger)
    files[f"calibration_{name}.csv"] = pd.DataFrame({"score": curve.grid, "value": curve.values})
    for fname, df in files.items():
        write_frame(df, os.path.join(out, fname))
    return sorted(files)


def run_curves(cfg, logger):
    with _stage("ingest", logger):
        dataset = _load_dataset(cfg, logger, simulate_if_missing=False)
        scores = _load_scores(cfg, dataset.n_rows)
    with _stage("split", logger):
        _, _, valid_idx = split_indices(dataset.n_rows, cfg.split, cfg.seed)
    files = []
    with _stage("curves", logger):
        valid = dataset.subset(valid_idx)
        for name, s in scores.items():
            files += _write_curves(name, valid.y, valid.exposure, s[valid_idx], valid.mu, cfg.out, logger)
    return {"files": files}


def run_sweep(cfg, logger):
    with _stage("ingest", logger):
        dataset = _load_dataset(cfg, logger)
    with _stage("split", logger):
        train_idx, smooth_idx, valid_idx = split_indices(dataset.n_rows, cfg.split, cfg.seed)
    with _stage("fit", logger):
        _, scores = _fit_models(dataset, train_idx, cfg, logger)
    with _stage("sweep", logger):
        df = alpha_sweep(dataset.y, dataset.exposure, scores, train_idx, smooth_idx, valid_idx,
                         alpha0_grid=cfg.alpha0_grid, kernel=cfg.kernel, alpha1=cfg.alpha1,
                         verbose=cfg.verbose, logger=logger)
        write_frame(df, os.path.join(cfg.out, "sweep.csv"))
        write_json({"baseline": df.attrs["baseline"]}, os.path.join(cfg.out, "sweep_baseline.json"))
    return {"files": ["sweep.csv", "sweep_baseline.json"], "baseline": df.attrs["baseline"]}


def _audit_model(scores, smooth, valid, cfg, logger):
    """Correct one scorer on the smoothing rows and compare both versions on the validation rows."""
    s_smooth, s_valid = scores
    corrected = autocalibrate(s_smooth, smooth.y, smooth.exposure, s_valid, kernel=cfg.kernel,
                              bandwidth=cfg.bandwidth, monotone_projection=cfg.monotone, logger=logger)
    _, factor = global_balance_correction(s_smooth, smooth.y, smooth.exposure)
    balanced = factor * s_valid
    y, e = valid.y, valid.exposure
    versions = {"uncorrected": s_valid, "autocalibrated": corrected, "global_balance": balanced}

    try:
        rho = spearman(s_valid, corrected)
    except DegenerateError as exc:
        logger.warning(f"spearman skipped: {exc}")
        rho = None

    departure = {}
    for key in ["uncorrected", "autocalibrated"]:
        d = calibration_curve(versions[key], y, e, logger=logger).departure
        departure[key] = None if np.isnan(d) else d

    dominance = check_dominance(y, e, s_valid, corrected, xi_grid=cfg.xi_grid)
    convex = convex_order_check(e * corrected, y, n_boot=cfg.n_boot, seed=cfg.seed)
    return corrected, {
        "summary": {k: score_summary(v) for k, v in versions.items()},
        "bias": {k: bias(y, e, v) for k, v in versions.items()},
        "poisson_loss": {k: empirical_poisson_loss(y, e, v) for k, v in versions.items()},
        "deviance": {"xi": [float(x) for x in cfg.xi_grid],
                     **{k: [mean_deviance(xi, y, e, v) for xi in cfg.xi_grid] for k, v in versions.items()}},
        "global_balance_factor": factor,
        "spearman": rho,
        "calibration_departure": departure,
        "dominance": dominance.to_dict(),
        "convex_order": convex.to_dict(),
    }


def _summary_table(models):
    table = Table(title="validation summary")
    for col in ["model", "mean pi", "mean pi_BC", "bias", "bias BC", "loss", "loss BC", "spearman", "dominance"]:
        table.add_column(col, justify="right" if col != "model" else "left")
    for name, m in models.items():
        rho = "-" if m["spearman"] is None else f"{m['spearman']:.4f}"
        table.add_row(name, f"{m['summary']['uncorrected']['mean']:.4f}",
                      f"{m['summary']['autocalibrated']['mean']:.4f}",
                      f"{m['bias']['uncorrected']:+.4f}", f"{m['bias']['autocalibrated']:+.4f}",
                      f"{m['poisson_loss']['uncorrected']:.5f}", f"{m['poisson_loss']['autocalibrated']:.5f}",
                      rho, "yes" if m["dominance"]["sufficient"] else "no")
    return table


def run_report(cfg, logger):
    with _stage("ingest", logger):
        dataset = _load_dataset(cfg, logger)
    with _stage("split", logger):
        train_idx, smooth_idx, valid_idx = split_indices(dataset.n_rows, cfg.split, cfg.seed)
        smooth, valid = dataset.subset(smooth_idx), dataset.subset(valid_idx)
    files = []
    with _stage("fit", logger):
        fits, scores = _fit_models(dataset, train_idx, cfg, logger)
        for model, fit in fits.items():
            write_json(fit, os.path.join(cfg.out, f"fit_{model}.json"))
            files.append(f"fit_{model}.json")

    models = {}
    for model in cfg.models:
        s = scores[model]
        with _stage(f"calibrate {model}", logger):
            corrected, models[model] = _audit_model((s[smooth_idx], s[valid_idx]), smooth, valid, cfg, logger)
        with _stage(f"curves {model}", logger):
            files += _write_curves(model, valid.y, valid.exposure, s[valid_idx], valid.mu, cfg.out, logger)
            files += _write_curves(f"{model}_bc", valid.y, valid.exposure, corrected, valid.mu, cfg.out, logger)
            fname = f"qq_{model}.csv"
            write_frame(qq_pairs(s[valid_idx], corrected).rename(columns={"a": "uncorrected", "b": "autocalibrated"}),
                        os.path.join(cfg.out, fname))
            files.append(fname)

    report = {
        "config": cfg.to_dict(),
        "n_rows": dataset.n_rows,
        "split_sizes": [len(train_idx), len(smooth_idx), len(valid_idx)],
        "validation_mean_y": float(np.mean(valid.y)),
        "models": models,
        "files": sorted(files),
    }
    # curve files first, the report last
    with _stage("report", logger):
        write_json(report, os.path.join(cfg.out, "report.json"))
    logger.console.print(_summary_table(models))
    return report


RUNNERS = {
    "simulate": run_simulate,
    "fit": run_fit,
    "calibrate": run_calibrate,
    "dominance": run_dominance,
    "curves": run_curves,
    "sweep": run_sweep,
    "report": run_report,
}


def run_pipeline(cfg, logger=None):
    """Run one subcommand and return its summary dict (for report: the report itself)."""
    logger = logger if logger else LogPrint(verbose=cfg.verbose)
    os.makedirs(cfg.out, exist_ok=True)
    return RUNNERS[cfg.subcommand](cfg, logger)


def build_parser():
    parser = argparse.ArgumentParser(prog="autocal", description="Autocalibration and Tweedie dominance toolkit.")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sub.add_argument("--out", required=True, help="Output directory.")
        sub.add_argument("--data", default=None, help="Portfolio CSV (y, exposure, x1.., mu).")
        sub.add_argument("--scores", nargs="+", default=None, help="Score CSVs with columns row_id,score.")
        sub.add_argument("--config", default=None, help="JSON file with default settings.")
        sub.add_argument("--seed", type=int, default=None)
        sub.add_argument("--n", type=int, default=None, help="Rows to simulate when --data is omitted.")
        sub.add_argument("--shape", choices=[s.value for s in Shape], default=None)
        sub.add_argument("--split", default=None, help="train,smoothing,validation fractions.")
        sub.add_argument("--models", default=None, help=f"Comma separated subset of {','.join(MODELS)}.")
        sub.add_argument("--xi", default=None, help="Comma separated Tweedie powers.")
        sub.add_argument("--alpha0", type=float, default=None)
        sub.add_argument("--alpha1", type=float, default=None)
        sub.add_argument("--kernel", choices=[k.value for k in Kernel], default=None)
        sub.add_argument("--monotone", action="store_true", help="Project the correction onto monotone maps.")
        sub.add_argument("--n-boot", dest="n_boot", type=int, default=None)
        sub.add_argument("--distort", default=None, help="kind:param applied to fitted scores, e.g. scale:0.7.")
        sub.add_argument("--quiet", action="store_true")
    return parser


def _as_bool(value):
    if isinstance(value, str):
        return value.strip().lower() in ("1", "true", "yes")
    return bool(value)


def _parse_distort(value):
    if value is None:
        return None
    if isinstance(value, str):
        kind, sep, param = value.partition(":")
        if not sep:
            raise UsageError(f"--distort expects kind:param, got {value!r}")
        return kind, float(param)
    return str(value[0]), float(value[1])


def build_config(args):
    """Flags win over AUTOCAL_* environment variables, which win over the --config file."""
    config = read_config(args.config)

    def setting(key, flag, default, cast):
        return flag if flag is not None else get_setting(key, config, default=default, cast=cast)

    try:
        return RunConfig(
            subcommand=args.subcommand,
            out=args.out,
            data=setting("data", args.data, None, str),
            scores=tuple(args.scores) if args.scores else _as_tuple(get_setting("scores", config, default=()), str),
            seed=setting("seed", args.seed, 42, int),
            n=setting("n", args.n, 10_000, int),
            shape=setting("shape", args.shape, Shape.UNIVARIATE.value, str),
            split=_as_tuple(setting("split", args.split, (0.6, 0.2, 0.2), lambda v: v), float),
            models=_as_tuple(setting("models", args.models, DEFAULT_MODELS, lambda v: v), str),
            kernel=setting("kernel", args.kernel, Kernel.RECTANGULAR.value, str),
            alpha0=setting("alpha0", args.alpha0, 0.05, float),
            alpha1=setting("alpha1", args.alpha1, 0.0, float),
            monotone=args.monotone or get_setting("monotone", config, default=False, cast=_as_bool),
            xi_grid=_as_tuple(setting("xi", args.xi, DEFAULT_XI_GRID, lambda v: v), float),
            alpha0_grid=_as_tuple(get_setting("alpha0_grid", config, default=tuple(DEFAULT_SWEEP_GRID)), float),
            n_boot=setting("n_boot", args.n_boot, 200, int),
            distort=_parse_distort(setting("distort", args.distort, None, lambda v: v)),
            verbose=not args.quiet,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (UsageError, DomainError, DataError)):
            raise
        raise UsageError(str(exc))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logger = LogPrint(log_dir=os.path.join(args.out, "logs"), verbose=not args.quiet)
    try:
        cfg = build_config(args)
        run_pipeline(cfg, logger)
    except UsageError as exc:
        logger.error(f"stage '{getattr(exc, 'stage', 'config')}' failed: {exc}")
        return EXIT_USAGE
    except (DataError, DomainError) as exc:
        logger.error(f"stage '{getattr(exc, 'stage', 'config')}' failed: {exc}")
        return EXIT_DATA
    except NumericError as exc:
        logger.error(f"stage '{getattr(exc, 'stage', 'config')}' failed: {exc}")
        return EXIT_NUMERIC
    finally:
        logger.close()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
