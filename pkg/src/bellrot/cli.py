"""Command-line entry point: ``bellrot <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import fileio
from .bell import (
    SINGLE_AXIS_INITIALS,
    SolverError,
    closed_form_coefficients,
    equal_probability_axes,
    matrix_coefficients,
    outcome_distribution,
    MeasurementAxis,
    sphere_map,
    single_axis_amplitudes,
    single_axis_term,
)
from .experiments import ExperimentConfig, aggregate, alpha_sweep, run_campaign
from .quantum import BELL_ORDER, AxisAngle, BellKind, RotationVector

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

DEFAULT_ALPHAS = "0,0.001,0.002,0.005,0.01,0.02"

log = logging.getLogger("bellrot")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _rotation(text: str) -> RotationVector:
    values = _floats(text)
    if len(values) != 3:
        raise argparse.ArgumentTypeError("rotation needs three comma-separated angles in radians")
    return RotationVector(*values)


def _grid(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 91x180, got {text!r}") from None


def _bell(text: str) -> BellKind:
    try:
        return BellKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _write(path, text: str) -> None:
    try:
        fileio.atomic_write(path, text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", EXIT_IO) from exc


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        _write(out, text)


def _with_suffix(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix + path.suffix)


# --- subcommands -----------------------------------------------------------


def cmd_spheres(args) -> int:
    n_theta, n_lambda = args.grid
    try:
        smap = sphere_map(args.initial, args.rot, args.alpha, n_theta, n_lambda)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    _emit(fileio.sphere_csv(smap), args.out)
    if args.slice_theta is not None:
        lam = 2 * np.pi * np.arange(n_lambda) / n_lambda
        lines = [f"# artifact: bellrot {__version__}", f"# initial: {args.initial.value}", f"# theta_rad: {fileio.fmt(args.slice_theta)}"]
        lines.append(fileio.SPHERE_HEADER)
        for a in lam:
            dist = outcome_distribution(args.initial, args.rot, MeasurementAxis(args.slice_theta, a), args.alpha)
            lines.append(fileio.probability_row((args.slice_theta, a), dist.as_array()))
        target = _with_suffix(Path(args.out), "_slice") if args.out else None
        _emit("\n".join(lines) + "\n", target)
    return EXIT_OK


def cmd_equal_points(args) -> int:
    try:
        points = equal_probability_axes(args.initial)
    except SolverError as exc:
        raise CliError(str(exc), EXIT_SOLVER) from exc
    lines = [f"# artifact: bellrot {__version__}", f"# initial: {args.initial.value}"]
    lines.append("theta_rad,lambda_rad,p_phi_plus,p_phi_minus,p_psi_plus,variance,spread")
    for p in points:
        dist = outcome_distribution(args.initial, RotationVector(), p.axis)
        lines.append(
            ",".join(
                fileio.fmt(v)
                for v in (p.axis.elevation, p.axis.azimuth, dist.p_phi_plus, dist.p_phi_minus, dist.p_psi_plus, p.variance, p.spread)
            )
        )
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _complex(z: complex) -> str:
    z = complex(z)
    re = 0.0 if abs(z.real) < 5e-13 else z.real
    im = 0.0 if abs(z.imag) < 5e-13 else z.imag
    return f"{re:+.6f}{im:+.6f}i"


def cmd_rotation_table(args) -> int:
    theta = args.theta
    lines = [f"# rotation angle: {theta:.9g} rad", "# amplitudes ordered (phi+, phi-, psi+, psi-)"]
    lines.append("axis,initial,expected,matrix_amplitudes,max_dev_table,max_dev_closed_form")
    worst = 0.0
    for axis in "xyz":
        k = tuple(float(a == axis) for a in "xyz")
        aa = AxisAngle(k, theta)
        for initial in SINGLE_AXIS_INITIALS:
            matrix = matrix_coefficients(initial, aa)
            dev_table = float(np.max(np.abs(matrix - single_axis_amplitudes(axis, initial, theta))))
            dev_closed = float(np.max(np.abs(matrix - closed_form_coefficients(initial, aa))))
            worst = max(worst, dev_table, dev_closed)
            amps = " ".join(_complex(a) for a in matrix)
            lines.append(f"{axis},{initial.value},{single_axis_term(axis, initial)},{amps},{dev_table:.3e},{dev_closed:.3e}")
    lines.append(f"# max deviation: {worst:.3e}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _load(args) -> tuple[ExperimentConfig, dict]:
    if args.config is None:
        cfg, keys = ExperimentConfig(), set()
    else:
        try:
            cfg, keys = fileio.load_config(args.config)
        except fileio.ConfigError as exc:
            raise CliError(f"{args.config}: {exc}", EXIT_CONFIG) from exc
        except OSError as exc:
            raise CliError(f"cannot read config {args.config}: {exc.strerror or exc}", EXIT_IO) from exc
    meta = {}
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
        meta["seed_source"] = "command line"
    elif "master_seed" in keys:
        meta["seed_source"] = "config"
    else:
        seed = int(np.random.SeedSequence().entropy % (2**63))
        cfg = dataclasses.replace(cfg, master_seed=seed)
        meta["seed_source"] = "generated"
    return cfg, meta


def _output_paths(out) -> tuple[Path, Path]:
    if out is None:
        raise CliError("--out is required", EXIT_CONFIG)
    out = Path(out)
    if out.suffix.lower() in (".csv", ".json"):
        base = out.with_suffix("")
    else:
        base = out
    return base.with_suffix(".csv"), base.with_suffix(".json")


def cmd_estimate(args) -> int:
    cfg, meta = _load(args)
    csv_path, json_path = _output_paths(args.out)
    records = run_campaign(cfg, workers=args.workers)
    agg = aggregate(records)
    if agg.total_restarts:
        log.warning("%d filter restarts after degenerate likelihoods", agg.total_restarts)
    meta["restarts"] = agg.total_restarts
    _write(json_path, fileio.results_json(agg, cfg, records if args.per_run else None, meta))
    _write(csv_path, fileio.results_csv(agg, cfg, meta))
    print(f"final mean total error {agg.mean_error[-1]:.6g} rad at {agg.resources[-1]} resources ({agg.n_runs} runs)")
    return EXIT_OK


def cmd_alpha_sweep(args) -> int:
    cfg, meta = _load(args)
    csv_path, json_path = _output_paths(args.out)
    alphas = args.alphas
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise CliError("alphas must lie in [0, 1]", EXIT_CONFIG)
    meta["alphas"] = ",".join(fileio.fmt(a) for a in alphas)
    rows = alpha_sweep(cfg, alphas, workers=args.workers)
    _write(json_path, fileio.sweep_json(rows, cfg, meta))
    _write(csv_path, fileio.sweep_csv(rows, cfg, meta))
    for row in rows:
        print(f"alpha={row.alpha:<8g} {row.estimator:<22} {row.mean_error:.6g} +/- {row.std_error:.3g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellrot", description="Bell-state rotation estimation toolkit")
    parser.add_argument("--version", action="version", version=f"bellrot {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (stdout when omitted, where allowed)")

    campaign = argparse.ArgumentParser(add_help=False)
    campaign.add_argument("--config", help="key = value config file")
    campaign.add_argument("--seed", type=int, help="master seed (overrides the config)")
    campaign.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("spheres", parents=[common], help="outcome probabilities over measurement axes")
    p.add_argument("--initial", type=_bell, default=BellKind.PHI_PLUS)
    p.add_argument("--rot", type=_rotation, default=RotationVector(), help="theta_x,theta_y,theta_z in radians")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--grid", type=_grid, default=(91, 180), help="n_theta x n_lambda, e.g. 91x180")
    p.add_argument("--slice-theta", type=float, help="also write a fixed-theta slice over lambda")
    p.set_defaults(func=cmd_spheres)

    p = sub.add_parser("equal-points", parents=[common], help="equal-probability measurement axes")
    p.add_argument("--initial", type=_bell, default=BellKind.PHI_PLUS)
    p.set_defaults(func=cmd_equal_points)

    p = sub.add_parser("rotation-table", parents=[common], help="single-axis rotations of the Bell states")
    p.add_argument("--theta", type=float, default=float(np.radians(20.0)), help="rotation angle in radians")
    p.set_defaults(func=cmd_rotation_table)

    p = sub.add_parser("estimate", parents=[common, campaign], help="error against resource count")
    p.add_argument("--per-run", action="store_true", help="include per-run records in the JSON output")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("alpha-sweep", parents=[common, campaign], help="final errors against mixing fraction")
    p.add_argument("--alphas", type=_floats, default=_floats(DEFAULT_ALPHAS))
    p.set_defaults(func=cmd_alpha_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"bellrot {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
