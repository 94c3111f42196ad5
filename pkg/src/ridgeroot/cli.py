"""Command-line interface: test, estimate, select-lambda, simulate.

Matrices are dense CSV (comma separated, optional single header line,
row-major, C locale decimal points). Results are written as JSON with a
schema_version field and the fully resolved configuration for provenance.

Exit codes: 0 ok, 2 input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import CsvFormatError, InputError, RidgeRootError, SpecValidationError
from .fmatrix import LinearModel, build_sscp
from .pipeline import FitConfig, estimate_edge_from_spectrum, make_edge_solver, run_test
from .power import AlternativePrior, select_lambda
from .simulate import SCHEMA_VERSION, ExperimentSpec, run_experiment
from .stieltjes import SpectrumView

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

_FLOAT_FMT = "%.17g"  # lossless float64 round-trip


def read_matrix_csv(path) -> np.ndarray:
    """Parse a dense CSV matrix, reporting the offending row/column on errors."""
    path = Path(path)
    if not path.exists():
        raise CsvFormatError(f"{path}: file not found")
    rows: list[list[float]] = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 1:
                try:
                    [float(cell) for cell in row]
                except ValueError:
                    continue  # header line
            parsed = []
            for colno, cell in enumerate(row, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError as exc:
                    raise CsvFormatError(
                        f"{path}: row {lineno}, column {colno}: "
                        f"cannot parse {cell!r} as a number"
                    ) from exc
            if width is None:
                width = len(parsed)
            elif len(parsed) != width:
                raise CsvFormatError(
                    f"{path}: row {lineno} has {len(parsed)} fields, expected {width}"
                )
            rows.append(parsed)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def write_matrix_csv(path, matrix: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(matrix), delimiter=",", fmt=_FLOAT_FMT)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_jsonify)
        fh.write("\n")


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _parse_alphas(text: str) -> tuple:
    try:
        alphas = tuple(float(a) for a in text.split(","))
    except ValueError as exc:
        raise InputError(f"cannot parse alpha list {text!r}") from exc
    if not alphas or any(not 0 < a < 1 for a in alphas):
        raise InputError("alpha levels must lie in (0, 1)")
    return alphas


def _fit_config(args) -> FitConfig:
    return FitConfig(
        K=args.K,
        I=args.I,
        ode_steps=args.ode_steps,
        lambda_grid=args.lambda_grid,
    )


def _load_model(args) -> LinearModel:
    Y = read_matrix_csv(args.Y)
    X = read_matrix_csv(args.X)
    C = read_matrix_csv(args.C) if args.C else np.eye(X.shape[0])
    return LinearModel(Y=Y, X=X, C=C)


def _prior_for_policy(policy: str, p: int) -> AlternativePrior:
    if policy == "data-driven-I":
        return AlternativePrior.identity(p)
    raise InputError(
        "data-driven-Sigma needs the true covariance and is available only "
        "inside `simulate`; use --lambda or --lambda-policy data-driven-I"
    )


def _resolved_config(args, extra: dict) -> dict:
    cfg = {
        "command": args.command,
        "seed": getattr(args, "seed", None),
        "alphas": list(getattr(args, "alphas", ()) or ()),
        "fit": _fit_config(args).to_dict() if hasattr(args, "K") else {},
    }
    cfg.update(extra)
    return cfg


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_test(args) -> int:
    model = _load_model(args)
    config = _fit_config(args)
    lam = args.lam
    prior = None
    if lam is None:
        if args.lambda_policy == "fixed":
            raise InputError("--lambda is required with --lambda-policy fixed")
        prior = _prior_for_policy(args.lambda_policy, model.p)

    sscp = build_sscp(model)
    out_dir = Path(args.out)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": _resolved_config(args, {
            "Y": str(args.Y), "X": str(args.X), "C": str(args.C) if args.C else None,
            "lambda": lam, "lambda_policy": args.lambda_policy,
        }),
        "debug": {
            "p": sscp.p, "n1": sscp.n1, "n2": sscp.n2,
            "w1_trace": float(np.trace(sscp.W1)),
            "w2_trace": float(np.trace(sscp.W2)),
        },
    }
    try:
        outcome = run_test(
            model.Y, model.X, model.C,
            lam=lam, prior=prior, alphas=args.alphas, config=config,
        )
    except RidgeRootError as exc:
        # keep the SSCP diagnostics on disk even when the numerics fail
        payload["error"] = f"{type(exc).__name__}: {exc}"
        _write_json(out_dir / "test_report.json", payload)
        raise
    report = outcome.report
    payload["report"] = report.to_dict()
    payload["edge"] = {
        "rho": outcome.edge_fit.params.rho,
        "beta": outcome.edge_fit.params.beta,
        "is_discrete_edge": outcome.edge_fit.params.is_discrete_edge,
        "lp_loss": outcome.edge_fit.lp_report.loss_theta,
        "n_atoms": outcome.edge_fit.lp_report.n_active,
    }
    payload["top_k"] = outcome.root.top_k
    if outcome.selection is not None:
        payload["selection"] = {
            "grid": outcome.selection.grid,
            "ratio": outcome.selection.ratio,
            "lambda_opt": outcome.selection.lambda_opt,
        }
    _write_json(out_dir / "test_report.json", payload)

    print(f"ridge-regularized largest root test (ridgeroot {__version__})")
    print(f"  p = {model.p}, m = {model.m}, n1 = {model.n1}, n2 = {model.n2}")
    print(f"  lambda    = {report.lam:.6g}"
          + ("  (data-driven)" if outcome.selection is not None else ""))
    print(f"  ell_max   = {report.ell_max:.10g}")
    print(f"  Theta1    = {report.theta1:.10g}")
    print(f"  Theta2    = {report.theta2:.10g}")
    print(f"  statistic = {report.statistic:.10g}")
    print(f"  p-value   = {report.p_value:.6g}")
    for a, rej in sorted(report.reject_at.items()):
        print(f"  reject at alpha={a:g}: {'yes' if rej else 'no'}")
    print(f"  report written to {out_dir / 'test_report.json'}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    model = _load_model(args)
    if args.lam is None:
        raise InputError("--lambda is required for `estimate`")
    sscp = build_sscp(model)
    view = SpectrumView.from_sscp(sscp)
    fit = estimate_edge_from_spectrum(view, args.lam, _fit_config(args))
    p = fit.params
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": _resolved_config(args, {
            "Y": str(args.Y), "X": str(args.X), "C": str(args.C) if args.C else None,
            "lambda": args.lam,
        }),
        "edge_params": {
            "lambda": p.lam, "rho": p.rho, "beta": p.beta,
            "s_at_beta": p.s_at_beta, "s1_at_beta": p.s1_at_beta,
            "s2_at_beta": p.s2_at_beta, "theta1": p.theta1, "theta2": p.theta2,
            "is_discrete_edge": p.is_discrete_edge,
        },
        "measure": {
            "masses": fit.lp_report.measure.masses,
            "weights": fit.lp_report.measure.weights,
            "lp_loss": fit.lp_report.loss_theta,
        },
    }
    out_dir = Path(args.out)
    _write_json(out_dir / "edge_params.json", payload)
    print(f"Theta1 = {p.theta1:.10g}, Theta2 = {p.theta2:.10g} "
          f"(rho = {p.rho:.6g}, beta = {p.beta:.6g})")
    print(f"written to {out_dir / 'edge_params.json'}")
    return EXIT_OK


def cmd_select_lambda(args) -> int:
    model = _load_model(args)
    sscp = build_sscp(model)
    view = SpectrumView.from_sscp(sscp)
    prior = (
        AlternativePrior.polynomial(*args.prior_pis)
        if args.prior_pis is not None
        else AlternativePrior.identity(sscp.p)
    )
    config = _fit_config(args)
    selection = select_lambda(
        view, sscp, prior, make_edge_solver(config), grid_size=args.lambda_grid
    )
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": _resolved_config(args, {
            "Y": str(args.Y), "X": str(args.X), "C": str(args.C) if args.C else None,
            "prior": "polynomial" if args.prior_pis else "identity",
        }),
        "selection": {
            "grid": selection.grid,
            "xi": selection.xi,
            "theta2": selection.theta2,
            "ratio": selection.ratio,
            "ok": selection.ok,
            "lambda_opt": selection.lambda_opt,
        },
    }
    out_dir = Path(args.out)
    _write_json(out_dir / "lambda_selection.json", payload)
    with open(out_dir / "lambda_selection.csv", "w") as fh:
        fh.write("lambda,xi,theta2,ratio,ok\n")
        for row in zip(selection.grid, selection.xi, selection.theta2,
                       selection.ratio, selection.ok):
            fh.write("%.10g,%.10g,%.10g,%.10g,%d\n" % row)
    print(f"lambda_opt = {selection.lambda_opt:.10g}")
    print(f"written to {out_dir / 'lambda_selection.json'}")
    return EXIT_OK


def _resolve_spec_path(raw: str) -> Path:
    path = Path(raw)
    if path.exists():
        return path
    from importlib import resources

    candidate = resources.files("ridgeroot") / "data" / f"{raw}.json"
    if candidate.is_file():
        return Path(str(candidate))
    raise SpecValidationError(f"spec file {raw!r} not found")


def _emit_replicate_data(spec: ExperimentSpec, out_dir: Path) -> dict:
    """Write the first replicate's (Y, X, C) for round-tripping through `test`."""
    from .simulate import _prepare_population, _spawn_seeds, draw_errors

    cov_ss, data_ss, _ = _spawn_seeds(spec)
    sigma, sqrt_sigma, eigs = _prepare_population(spec, cov_ss)
    rng = np.random.default_rng(data_ss.spawn(1)[0])
    n1, n_T, p = spec.n1, spec.n_T, spec.p
    X = rng.standard_normal((n1, n_T))
    Z = draw_errors(spec.error_law, (p, n_T), rng)
    Y = sqrt_sigma @ Z
    if spec.signal_zeta > 0:
        B = np.zeros((p, n1))
        B[:, 0] = rng.normal(0.0, spec.signal_zeta, size=p)
        Y = Y + B @ X
    data_dir = out_dir / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(data_dir / "Y.csv", Y)
    write_matrix_csv(data_dir / "X.csv", X)
    write_matrix_csv(data_dir / "C.csv", np.eye(n1))
    return {"Y": str(data_dir / "Y.csv"), "X": str(data_dir / "X.csv"),
            "C": str(data_dir / "C.csv")}


def _write_summary_csv(result, out_dir: Path) -> list:
    written = []
    if result.kind == "null_size":
        path = out_dir / "size.csv"
        with open(path, "w") as fh:
            fh.write("lambda,alpha,rejection_rate\n")
            for lam, per_alpha in sorted(result.summary["size"].items()):
                for a, rate in sorted(per_alpha.items()):
                    fh.write(f"{lam},{a},{rate:.10g}\n")
        written.append(path)
    elif result.kind == "power_curve":
        path = out_dir / "power.csv"
        asym = result.summary["power_asymptotic"]
        sized = result.summary["power_size_adjusted"]

        def order(key):
            zeta, lam, a = key.split("|")
            try:
                lam_key = float(lam)
            except ValueError:
                lam_key = float("inf")  # data-driven policies sort last
            return (float(zeta), lam_key, float(a))

        with open(path, "w") as fh:
            fh.write("zeta,lambda,alpha,power_asymptotic,power_size_adjusted\n")
            for key in sorted(asym, key=order):
                zeta, lam, a = key.split("|")
                fh.write(
                    f"{zeta},{lam},{a},{asym[key]:.10g},{sized.get(key, float('nan')):.10g}\n"
                )
        written.append(path)
    else:
        path = out_dir / "estimation.csv"
        with open(path, "w") as fh:
            fh.write(
                "lambda,theta1_scaled_error_mean,theta1_scaled_error_sd,"
                "theta2_scaled_error_mean,theta2_scaled_error_sd,n_effective\n"
            )
            for lam, row in sorted(result.summary["estimation"].items()):
                fh.write(
                    f"{lam},{row['theta1_scaled_error_mean']:.10g},"
                    f"{row['theta1_scaled_error_sd']:.10g},"
                    f"{row['theta2_scaled_error_mean']:.10g},"
                    f"{row['theta2_scaled_error_sd']:.10g},{row['n_effective']}\n"
                )
        written.append(path)
    # Per-replicate statistics, plot-ready.
    path = out_dir / "replicates.csv"
    with open(path, "w") as fh:
        fh.write("replicate,zeta,lambda,ell_max,theta1_hat,theta2_hat,statistic,"
                 "p_value,statistic_oracle\n")
        for i, rec in enumerate(result.records):
            if not rec.get("ok"):
                continue
            for entry in rec["entries"]:
                so = entry.get("statistic_oracle", float("nan"))
                fh.write(
                    f"{i},{rec['zeta']:.10g},{entry['lambda']:.10g},"
                    f"{entry['ell_max']:.10g},{entry['theta1_hat']:.10g},"
                    f"{entry['theta2_hat']:.10g},{entry['statistic']:.10g},"
                    f"{entry['p_value']:.10g},{so:.10g}\n"
                )
    written.append(path)
    return written


def cmd_simulate(args) -> int:
    spec_path = _resolve_spec_path(args.spec)
    spec = ExperimentSpec.from_json(spec_path.read_text())
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        data = spec.to_dict()
        data.update(overrides)
        spec = ExperimentSpec.from_dict(data)
    result = run_experiment(spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = result.to_dict(include_tables=False)
    if args.emit_data:
        payload["emitted_data"] = _emit_replicate_data(spec, out_dir)
    _write_json(out_dir / "result.json", payload)
    written = _write_summary_csv(result, out_dir)
    if result.failed_indices:
        print(f"warning: {len(result.failed_indices)} replicate(s) failed: "
              f"{result.failed_indices}", file=sys.stderr)
    print(f"{result.kind}: {spec.replicates} replicates done")
    for key, val in result.summary.items():
        if key == "size":
            for lam, per_alpha in sorted(val.items()):
                rates = ", ".join(f"alpha={a}: {r:.4f}" for a, r in sorted(per_alpha.items()))
                print(f"  lambda={lam}: {rates}")
    print(f"results written to {out_dir / 'result.json'}"
          + "".join(f", {p}" for p in written))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_fit_args(sp) -> None:
    sp.add_argument("--K", type=int, default=500, help="mass-grid size (default 500)")
    sp.add_argument("--I", type=int, default=500, help="z-grid size (default 500)")
    sp.add_argument("--ode-steps", type=int, default=2000, dest="ode_steps")
    sp.add_argument("--lambda-grid", type=int, default=25, dest="lambda_grid",
                    help="log-spaced grid size for data-driven lambda")


def _add_matrix_args(sp) -> None:
    sp.add_argument("--Y", required=True, help="responses CSV, p rows x n_T columns")
    sp.add_argument("--X", required=True, help="design CSV, m x n_T")
    sp.add_argument("--C", default=None, help="constraints CSV, m x n1 (default identity)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ridgeroot",
        description="Ridge-regularized largest root test for high-dimensional "
                    "general linear hypotheses",
    )
    parser.add_argument("--version", action="version", version=f"ridgeroot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("test", help="run the standardized test on CSV matrices")
    _add_matrix_args(sp)
    sp.add_argument("--lambda", type=float, default=None, dest="lam")
    sp.add_argument("--lambda-policy", default="fixed", dest="lambda_policy",
                    choices=["fixed", "data-driven-I", "data-driven-Sigma"])
    sp.add_argument("--alpha", type=_parse_alphas, default=(0.05,), dest="alphas",
                    help="comma-separated test levels, e.g. 0.05,0.01")
    _add_fit_args(sp)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default="ridgeroot_out")
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("estimate", help="estimate (rho, beta, Theta1, Theta2) only")
    _add_matrix_args(sp)
    sp.add_argument("--lambda", type=float, default=None, dest="lam")
    sp.add_argument("--alpha", type=_parse_alphas, default=(0.05,), dest="alphas")
    _add_fit_args(sp)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default="ridgeroot_out")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("select-lambda", help="data-driven ridge selection")
    _add_matrix_args(sp)
    sp.add_argument("--prior-pis", type=float, nargs=3, default=None,
                    metavar=("PI0", "PI1", "PI2"),
                    help="polynomial prior coefficients (default: identity prior)")
    sp.add_argument("--alpha", type=_parse_alphas, default=(0.05,), dest="alphas")
    _add_fit_args(sp)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default="ridgeroot_out")
    sp.set_defaults(func=cmd_select_lambda)

    sp = sub.add_parser("simulate", help="run a Monte Carlo experiment spec")
    sp.add_argument("--spec", required=True,
                    help="spec JSON path, or the name of a packaged spec "
                         "(e.g. table4_desk)")
    sp.add_argument("--seed", type=int, default=None, help="override the spec seed")
    sp.add_argument("--emit-data", action="store_true", dest="emit_data",
                    help="also write the first replicate's Y/X/C matrices")
    sp.add_argument("--out", default="ridgeroot_out")
    sp.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CsvFormatError, SpecValidationError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RidgeRootError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
