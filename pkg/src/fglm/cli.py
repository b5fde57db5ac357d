"""Command-line entry point for fitting, inference, selection and
simulation runs.

Every run writes a manifest echoing the effective configuration and the
seed so outputs can be reproduced bit for bit. Exit codes: 0 success,
2 data error, 3 configuration error, 4 convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import eigenbasis, estimate_covariance, fourier_basis, project_scores, reconstruct, save_basis
from .domain import center_dataset, load_dataset, load_grid
from .errors import ConfigError, ConvergenceError, DataError, FglmError
from .glm import SolverConfig, iwls_fit
from .inference import no_effect_test, simultaneous_band
from .links import LINK_NAMES, get_link
from .selection import FitMethod, loo_misclassification, loo_predictions, select_order
from .simulate import (
    coverage_experiment,
    link_misspec_experiment,
    power_experiment,
    statistic_calibration,
)
from .smoothing import SmootherConfig
from .spqr import save_link_estimate, spqr_fit

EXIT_OK = 0
EXIT_DATA = 2
EXIT_CONFIG = 3
EXIT_CONVERGENCE = 4

FIT_LINKS = LINK_NAMES + ("spqr",)


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the config error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def read_config_file(path) -> dict:
    """Parse `key = value` lines; '#' starts a comment."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _effective(args, config: dict, key: str, default, cast):
    """Flag value if given, else config-file value, else the default."""
    cli_value = getattr(args, key, None)
    if cli_value is not None:
        return cli_value
    if key in config:
        try:
            return cast(config[key])
        except ValueError as exc:
            raise ConfigError(f"config key {key}: {exc}") from exc
    return default


def _parse_basis_spec(spec: str) -> tuple[str, int]:
    try:
        kind, j_text = spec.split(":", 1)
        j = int(j_text)
    except ValueError:
        raise ConfigError(
            f"basis spec {spec!r} must look like fourier:J or empirical:J"
        ) from None
    if kind not in ("fourier", "empirical") or j < 1:
        raise ConfigError(f"invalid basis spec {spec!r}")
    return kind, j


def _solver_echo(args, config) -> dict:
    return {
        "tol": _effective(args, config, "tol", 1e-8, float),
        "max_iter": _effective(args, config, "max_iter", 100, int),
        "clamp_eps": _clamp_eps(args, config),
        "bandwidth": _effective(args, config, "bandwidth", None, float),
        "degree": _effective(args, config, "degree", 1, int),
        "kernel": _effective(args, config, "kernel", "epanechnikov", str),
        "max_outer": _max_outer(args, config),
        "seed": getattr(args, "seed", None),
    }


def _write_manifest(out: Path, command: str, effective: dict, args=None) -> None:
    manifest = {
        "command": command,
        "argv": getattr(args, "invocation_argv", sys.argv[1:]),
        "effective_config": effective,
        "version": __version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _load_inputs(args, config):
    response_kind = _effective(args, config, "response_kind", None, str)
    grid = load_grid(args.grid) if getattr(args, "grid", None) else None
    ds = load_dataset(args.data, grid=grid, response_kind=response_kind)
    return ds


def _prepare_basis_and_scores(ds, args, config):
    """Optionally center, build the requested basis, project the scores."""
    kind, j = _parse_basis_spec(
        _effective(args, config, "basis", "fourier:3", str)
    )
    center = not getattr(args, "no_center", False)
    mean_curve = None
    if kind == "empirical":
        ds_centered, mean_curve = center_dataset(ds)
        basis = eigenbasis(estimate_covariance(ds_centered), ds.grid, ds.weight, j)
        ds_used = ds_centered
    else:
        basis = fourier_basis(j, ds.grid, ds.weight)
        if center:
            ds_used, mean_curve = center_dataset(ds)
        else:
            ds_used = ds
    p = _effective(args, config, "p", None, int)
    if p is None:
        p = basis.size
    if not 1 <= p <= basis.size:
        raise ConfigError(f"p={p} outside 1..{basis.size} for this basis")
    scores = project_scores(ds_used, basis, p)
    return ds_used, basis, scores, p, mean_curve


def _solver_config(args, config) -> SolverConfig:
    return SolverConfig(
        tol=_effective(args, config, "tol", 1e-8, float),
        max_iter=_effective(args, config, "max_iter", 100, int),
    )


def _smoother_config(args, config) -> SmootherConfig:
    return SmootherConfig(
        bandwidth=_effective(args, config, "bandwidth", None, float),
        degree=_effective(args, config, "degree", 1, int),
        kernel=_effective(args, config, "kernel", "epanechnikov", str),
    )


def _clamp_eps(args, config) -> float:
    return _effective(args, config, "clamp_eps", 1e-10, float)


def _max_outer(args, config) -> int:
    return _effective(args, config, "max_outer", 25, int)


def _fit_once(scores, y, link_name, args, config):
    """Fit with a named link or the semiparametric path."""
    if link_name == "spqr":
        fit, link_est = spqr_fit(
            scores, y, _smoother_config(args, config),
            max_outer=_max_outer(args, config),
        )
        return fit, link_est
    fit = iwls_fit(
        scores, y,
        get_link(link_name, _clamp_eps(args, config)),
        _solver_config(args, config),
    )
    return fit, None


def _write_fit_outputs(out, fit, basis, link_name, link_est, ds):
    intercept, curve = reconstruct(fit.beta, basis)
    _write_csv(
        out / "coefficients.csv",
        ["index", "value"],
        [[k, repr(float(v))] for k, v in enumerate(fit.beta)],
    )
    _write_csv(
        out / "beta_curve.csv",
        ["t", "beta_slope", "beta_total"],
        zip(basis.grid.points, curve.values, intercept + curve.values),
    )
    _write_csv(
        out / "gamma.csv",
        [f"g{k}" for k in range(fit.beta.size)],
        [[repr(float(v)) for v in row] for row in fit.gamma_tilde],
    )
    report = {
        "n": ds.n,
        "p": fit.p,
        "link": link_name,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "deviance": fit.deviance,
        "intercept": intercept,
    }
    (out / "fit_report.json").write_text(json.dumps(report, indent=2))
    if link_est is not None:
        save_link_estimate(link_est, out / "link_estimate.csv")


def cmd_fit(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = _load_inputs(args, config)
    ds_used, basis, scores, p, _ = _prepare_basis_and_scores(ds, args, config)
    link_name = _effective(args, config, "link", "logit", str)
    if link_name not in FIT_LINKS:
        raise ConfigError(f"unknown link {link_name!r}")
    fit, link_est = _fit_once(scores, ds_used.responses, link_name, args, config)
    _write_fit_outputs(out, fit, basis, link_name, link_est, ds_used)
    if basis.kind == "empirical":
        save_basis(basis, out / "basis.csv", out / "basis_eigenvalues.csv")
    _write_manifest(
        out,
        "fit",
        {
            "data": str(args.data),
            "basis": f"{basis.kind}:{basis.size}",
            "link": link_name,
            "p": p,
            "n": ds.n,
            **_solver_echo(args, config),
        },
        args,
    )
    if not fit.converged:
        raise ConvergenceError(f"fit stopped after {fit.iterations} iterations")
    return EXIT_OK


def cmd_select(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = _load_inputs(args, config)
    ds_used, basis, _, _, _ = _prepare_basis_and_scores(ds, args, config)
    link_name = _effective(args, config, "link", "logit", str)
    criterion = _effective(args, config, "criterion", "aic", str)
    p_range = None
    spec = _effective(args, config, "p_range", None, str)
    if spec:
        try:
            lo, hi = (int(part) for part in spec.split(":", 1))
        except ValueError:
            raise ConfigError(f"p-range {spec!r} must look like lo:hi") from None
        p_range = range(lo, hi + 1)
    method = FitMethod(
        link=link_name,
        solver=_solver_config(args, config),
        smoother=_smoother_config(args, config),
        clamp_eps=_clamp_eps(args, config),
        max_outer=_max_outer(args, config),
    )
    selection = select_order(ds_used, basis, method, criterion, p_range)
    _write_csv(
        out / "order_selection.csv",
        ["p", criterion],
        zip(selection.candidate_orders, selection.criterion_values),
    )
    report = {
        "criterion": criterion,
        "chosen": selection.chosen,
        "orders": list(selection.candidate_orders),
        "criterion_values": list(selection.criterion_values),
        "deviances": list(selection.deviances),
        "penalties": list(selection.penalties),
        "failures": [list(f) for f in selection.failures],
    }
    (out / "selection_report.json").write_text(json.dumps(report, indent=2))
    print(f"chosen p = {selection.chosen} ({criterion})")
    _write_manifest(
        out,
        "select",
        {
            "data": str(args.data),
            "basis": f"{basis.kind}:{basis.size}",
            "link": link_name,
            "criterion": criterion,
            "chosen": selection.chosen,
            **_solver_echo(args, config),
        },
        args,
    )
    return EXIT_OK


def cmd_classify(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = _load_inputs(args, config)
    if ds.response_kind != "binary":
        raise ConfigError("classify requires binary responses")
    ds_used, basis, scores, p, _ = _prepare_basis_and_scores(ds, args, config)
    link_name = _effective(args, config, "link", "logit", str)
    threshold = _effective(args, config, "threshold", 0.5, float)
    method = FitMethod(
        link=link_name,
        solver=_solver_config(args, config),
        smoother=_smoother_config(args, config),
        clamp_eps=_clamp_eps(args, config),
        max_outer=_max_outer(args, config),
    )
    fit, predict = method.fit(scores, ds_used.responses)
    p_hat = predict(scores.values)
    loo = loo_predictions(ds_used, basis, p, method)
    rate0, rate1, overall = loo_misclassification(ds_used, basis, p, method, threshold)
    _write_csv(
        out / "probabilities.csv",
        ["id", "p_hat", "p_hat_loo", "class_loo"],
        [
            [
                ds_used.subject_ids[i],
                repr(float(p_hat[i])),
                repr(float(loo.predictions[i])),
                int(loo.predictions[i] >= threshold)
                if np.isfinite(loo.predictions[i])
                else "",
            ]
            for i in range(ds_used.n)
        ],
    )
    table = {
        "threshold": threshold,
        "link": link_name,
        "p": p,
        "n": ds_used.n,
        "n_class0": int(np.sum(ds_used.responses == 0)),
        "n_class1": int(np.sum(ds_used.responses == 1)),
        "misclassification_class0": rate0,
        "misclassification_class1": rate1,
        "misclassification_overall": overall,
        "loo_folds_skipped": loo.n_skipped,
    }
    (out / "misclassification.json").write_text(json.dumps(table, indent=2))
    print(
        f"leave-one-out misclassification: class0 {rate0:.1%}, "
        f"class1 {rate1:.1%}, overall {overall:.1%}"
    )
    _write_manifest(out, "classify", {**table, **_solver_echo(args, config)}, args)
    if not fit.converged:
        raise ConvergenceError("full-data fit did not converge")
    return EXIT_OK


def cmd_band(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = _load_inputs(args, config)
    ds_used, basis, scores, p, _ = _prepare_basis_and_scores(ds, args, config)
    link_name = _effective(args, config, "link", "logit", str)
    alpha = _effective(args, config, "alpha", 0.05, float)
    fit, link_est = _fit_once(scores, ds_used.responses, link_name, args, config)
    lower, upper = simultaneous_band(fit, basis, alpha)
    _write_csv(
        out / "band.csv",
        ["t", "lower", "upper"],
        zip(basis.grid.points, lower.values, upper.values),
    )
    _write_fit_outputs(out, fit, basis, link_name, link_est, ds_used)
    report = no_effect_test(fit, alpha)
    (out / "inference.json").write_text(report.to_json())
    _write_manifest(
        out,
        "band",
        {"data": str(args.data), "link": link_name, "p": p, "alpha": alpha,
         **_solver_echo(args, config)},
        args,
    )
    if not fit.converged:
        raise ConvergenceError("fit did not converge")
    return EXIT_OK


def _parse_float_list(text: str):
    return [float(part) for part in text.split(",") if part.strip()]


def _parse_int_list(text: str):
    return [int(part) for part in text.split(",") if part.strip()]


def cmd_simulate(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = _effective(args, config, "seed", 20240601, int)
    reps = _effective(args, config, "reps", None, int)
    p = _effective(args, config, "p", 3, int)
    alpha = _effective(args, config, "alpha", 0.05, float)
    grid_size = _effective(args, config, "grid_size", 101, int)
    experiment = args.experiment

    basis_mode = _effective(args, config, "sim_basis", "fourier", str)
    if experiment == "power":
        deltas = _parse_float_list(_effective(args, config, "delta", "0,0.5,1,1.5,2", str))
        ns = _parse_int_list(_effective(args, config, "n", "50,200", str))
        result = power_experiment(
            deltas, ns, n_reps=reps or 500, seed=seed, alpha=alpha, p=p,
            grid_size=grid_size, basis_mode=basis_mode,
            select_p_by_aic=bool(getattr(args, "aic_per_rep", False)),
        )
        _write_csv(
            out / "power.csv",
            ["delta", "n", "rejection_rate", "n_failed", "n_reps"],
            [
                [c.delta, c.n, repr(float(c.rejection_rate)), c.n_failed, c.n_reps]
                for c in result.cells
            ],
        )
        raw_rows = []
        for (delta, n), arr in result.raw.items():
            raw_rows.extend(
                [delta, n, rep, "" if not np.isfinite(v) else int(v)]
                for rep, v in enumerate(arr)
            )
        _write_csv(out / "power_raw.csv", ["delta", "n", "rep", "reject"], raw_rows)
        summary = {"cells": len(result.cells)}
    elif experiment == "calibration":
        n = _parse_int_list(_effective(args, config, "n", "2000", str))[0]
        result = statistic_calibration(
            n=n, p=p, n_reps=reps or 500, seed=seed, grid_size=grid_size,
            gamma=_effective(args, config, "gamma", "tilde", str),
        )
        _write_csv(
            out / "calibration.csv",
            ["rep", "t"],
            [[i, repr(float(t))] for i, t in enumerate(result.t_values)],
        )
        summary = {
            "mean": result.mean,
            "sd": result.sd,
            "kolmogorov_distance": result.kolmogorov_distance,
            "n_failed": result.n_failed,
        }
        (out / "calibration_summary.json").write_text(json.dumps(summary, indent=2))
    elif experiment == "coverage":
        n = _parse_int_list(_effective(args, config, "n", "500", str))[0]
        result = coverage_experiment(
            n=n, p=p, alpha=alpha, n_reps=reps or 300, seed=seed, grid_size=grid_size
        )
        _write_csv(
            out / "coverage.csv",
            ["rep", "covered"],
            [[i, int(c)] for i, c in enumerate(result.covered)],
        )
        summary = {
            "coverage_rate": result.coverage_rate,
            "alpha": alpha,
            "n_failed": result.n_failed,
        }
        (out / "coverage_summary.json").write_text(json.dumps(summary, indent=2))
    elif experiment == "linkmisspec":
        n = _parse_int_list(_effective(args, config, "n", "1000", str))[0]
        result = link_misspec_experiment(
            n=n, n_reps=reps or 50, seed=seed, p=p, grid_size=grid_size,
            smoother=_smoother_config(args, config), basis_mode=basis_mode,
        )
        keys = sorted(result.mean_curves)
        _write_csv(
            out / "misspec_mean_curves.csv",
            ["t", "truth"] + [f"{g}_{f}" for g, f in keys],
            [
                [float(t), repr(float(result.truth[k]))]
                + [repr(float(result.mean_curves[key][k])) for key in keys]
                for k, t in enumerate(result.grid)
            ],
        )
        error_rows = []
        for key in keys:
            error_rows.extend(
                [key[0], key[1], rep, repr(float(v))]
                for rep, v in enumerate(result.l2_errors[key])
            )
        _write_csv(
            out / "misspec_errors.csv",
            ["generator", "fitter", "rep", "l2_error"],
            error_rows,
        )
        summary = {
            f"{g}_{f}": {
                "mean_l2_error": float(np.mean(result.l2_errors[(g, f)])),
                "n_failed": result.n_failed[(g, f)],
            }
            for g, f in keys
        }
        (out / "misspec_summary.json").write_text(json.dumps(summary, indent=2))
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown experiment {experiment!r}")

    _write_manifest(
        out,
        "simulate",
        {
            "experiment": experiment,
            "seed": seed,
            "reps": reps,
            "p": p,
            "alpha": alpha,
            "grid_size": grid_size,
            "summary": summary,
        },
        args,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fglm", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int)

    def add_data(p):
        p.add_argument("--data", required=True, help="wide-format CSV")
        p.add_argument("--grid", help="one-line sidecar file with grid points")
        p.add_argument("--response-kind", choices=("binary", "count", "continuous"))
        p.add_argument("--basis", help="fourier:J or empirical:J")
        p.add_argument("--p", type=int)
        p.add_argument("--no-center", action="store_true")
        p.add_argument("--link", choices=FIT_LINKS)
        p.add_argument("--bandwidth", type=float)
        p.add_argument("--degree", type=int, choices=(1, 2))
        p.add_argument("--kernel", choices=("epanechnikov", "gaussian"))
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", type=int, dest="max_iter")

    p_fit = sub.add_parser("fit", help="fit the model and write coefficients")
    add_common(p_fit)
    add_data(p_fit)

    p_select = sub.add_parser("select", help="choose the model order")
    add_common(p_select)
    add_data(p_select)
    p_select.add_argument("--criterion", choices=("aic", "bic"))
    p_select.add_argument("--p-range", dest="p_range", help="lo:hi inclusive")

    p_classify = sub.add_parser("classify", help="per-subject probabilities and error rates")
    add_common(p_classify)
    add_data(p_classify)
    p_classify.add_argument("--threshold", type=float)

    p_band = sub.add_parser("band", help="simultaneous confidence band")
    add_common(p_band)
    add_data(p_band)
    p_band.add_argument("--alpha", type=float)

    p_sim = sub.add_parser("simulate", help="run a named replication experiment")
    add_common(p_sim)
    p_sim.add_argument(
        "--experiment",
        required=True,
        choices=("power", "calibration", "coverage", "linkmisspec"),
    )
    p_sim.add_argument("--n", help="comma-separated sample sizes")
    p_sim.add_argument("--delta", help="comma-separated signal scales")
    p_sim.add_argument("--reps", type=int)
    p_sim.add_argument("--p", type=int)
    p_sim.add_argument("--alpha", type=float)
    p_sim.add_argument("--grid-size", type=int, dest="grid_size")
    p_sim.add_argument("--bandwidth", type=float)
    p_sim.add_argument("--degree", type=int, choices=(1, 2))
    p_sim.add_argument("--kernel", choices=("epanechnikov", "gaussian"))
    p_sim.add_argument("--sim-basis", dest="sim_basis", choices=("fourier", "empirical"))
    p_sim.add_argument("--aic-per-rep", dest="aic_per_rep", action="store_true")
    p_sim.add_argument("--gamma", choices=("tilde", "population"))
    return parser


COMMANDS = {
    "fit": cmd_fit,
    "select": cmd_select,
    "classify": cmd_classify,
    "band": cmd_band,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.invocation_argv = list(argv) if argv is not None else sys.argv[1:]
        config = read_config_file(args.config) if args.config else {}
        return COMMANDS[args.command](args, config)
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FglmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
