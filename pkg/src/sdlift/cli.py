"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 a Koopman
check failed.  Diagnostics go to stderr; stdout gets one summary line.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .closedloop import ZeroOrderHold, run_closed_loop
from .errors import (
    BadEigenPair, ConfigError, ContinuityError, DomainError, NonFiniteError,
    NonFiniteStateError, OutOfBoundsError, ParseError, ShapeError,
)
from .exprdsl import Observable
from .flow import flow_periods
from .koopman import nonlinear_eigenfunction_check, verify_linear_koopman
from .lifting import run_lifted
from .signals import GridSpec, format_float, global_times, signal_to_csv, unlift

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4


class CheckFailed(Exception):
    pass


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else format_float(v) for v in row])


def _write_global(path: Path, prefix: str, t, values):
    header = ["t"] + [f"{prefix}{i}" for i in range(values.shape[1])]
    _write_csv(path, header, (np.concatenate(([ti], row)) for ti, row in zip(t, values)))


def _write_plot(out: Path, name: str, t, values, prefix: str):
    """Two-column ``t value`` files per component plus a gnuplot script."""
    plot_dir = out / "plot"
    plot_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for i in range(values.shape[1]):
        fname = f"{name}_{prefix}{i}.dat"
        with (plot_dir / fname).open("w") as fh:
            for ti, v in zip(t, values[:, i]):
                fh.write(f"{format_float(ti)} {format_float(v)}\n")
        files.append((fname, f"{prefix}{i}"))
    script = plot_dir / f"{name}.gp"
    lines = [
        "set terminal pngcairo size 900,600",
        f"set output '{name}.png'",
        "set xlabel 't'",
        "set key outside",
        "plot " + ", \\\n     ".join(f"'{f}' using 1:2 with lines title '{lbl}'" for f, lbl in files),
        "",
    ]
    script.write_text("\n".join(lines))


def _prepare(args):
    path = Path(args.config)
    data = cfgmod.load_json(path)
    grid = cfgmod.grid_from_dict(data.get("grid"), args.T, args.N)
    cfg = cfgmod.integrator_from(data, grid, args.method)
    steps = args.steps if args.steps is not None else int(data.get("steps", 1))
    if steps < 1:
        raise ConfigError("steps must be positive")
    return path, data, grid, cfg, steps


def _plant(data):
    key = "system" if "system" in data else "plant"
    return cfgmod.system_from_dict(cfgmod._require(data, key, "config"))


def _x0(data, n):
    return cfgmod._vector(data.get("x0", [0.0] * n), n, "x0")


def _input(data, sys_, grid, steps, base_dir):
    # input-free plants take no signal at all
    if sys_.m == 0:
        return None
    return cfgmod.signal_from_dict(data.get("input"), sys_.m, grid, steps, base_dir)


def cmd_simulate(args) -> str:
    path, data, grid, cfg, steps = _prepare(args)
    sys_ = _plant(data)
    u = _input(data, sys_, grid, steps, path.parent)
    held = None if u is None else np.concatenate([seg.held_values() for seg in u])
    states = flow_periods(sys_, _x0(data, sys_.n), held, cfg, steps)
    outputs = np.array([sys_.h(row) for row in states])
    t = global_times(grid, states.shape[0])
    out = Path(args.out)
    _write_global(out / "trajectory.csv", "x", t, states)
    _write_global(out / "output.csv", "y", t, outputs)
    _write_plot(out, "trajectory", t, states, "x")
    return f"simulate: {states.shape[0]} rows over {steps} period(s) written to {out}"


def cmd_lift(args) -> str:
    path, data, grid, cfg, steps = _prepare(args)
    sys_ = _plant(data)
    u = _input(data, sys_, grid, steps, path.parent)
    states, outputs = run_lifted(sys_, _x0(data, sys_.n), u, cfg, steps)
    out = Path(args.out)
    seg_dir = out / "segments"
    seg_dir.mkdir(parents=True, exist_ok=True)
    for k, (xs, ys) in enumerate(zip(states, outputs)):
        signal_to_csv(xs, seg_dir / f"x_{k:04d}.csv")
        signal_to_csv(ys, seg_dir / f"y_{k:04d}.csv")
    xg, yg = unlift(states), unlift(outputs)
    t = global_times(grid, xg.shape[0])
    _write_global(out / "trajectory.csv", "x", t, xg)
    _write_global(out / "output.csv", "y", t, yg)
    _write_plot(out, "trajectory", t, xg, "x")
    return f"lift: {steps} segment(s) of {grid.N + 1} nodes written to {out}"


def _segment_rows(records, attr, grid):
    for rec in records:
        seg = getattr(rec, attr)
        for theta, row in zip(grid.nodes, seg.values):
            yield [rec.k * grid.T + theta, str(rec.k), theta, *row]


def cmd_closedloop(args) -> str:
    path, data, grid, cfg, steps = _prepare(args)
    plant = _plant(data)
    ctrl = cfgmod.controller_from_dict(cfgmod._require(data, "controller", "config"), plant.p)
    r = cfgmod.signal_from_dict(cfgmod._require(data, "reference", "config"), plant.p, grid,
                                steps, path.parent)
    records = run_closed_loop(plant, ctrl, ZeroOrderHold(), r, _x0(data, plant.n), cfg, steps)
    out = Path(args.out)
    for attr, dim in (("x", plant.n), ("y", plant.p), ("e", plant.p)):
        header = ["t", "k", "theta"] + [f"{attr}{i}" for i in range(dim)]
        _write_csv(out / f"{attr}.csv", header, _segment_rows(records, attr, grid))
    for attr, dim in (("v", ctrl.p_c), ("z", ctrl.n_c)):
        header = ["t", "k"] + [f"{attr}{i}" for i in range(dim)]
        rows = ([rec.k * grid.T, str(rec.k), *getattr(rec, attr)] for rec in records)
        _write_csv(out / f"{attr}.csv", header, rows)
    xg = unlift(type(r)(grid, [rec.x for rec in records]))
    _write_plot(out, "closedloop_x", global_times(grid, xg.shape[0]), xg, "x")
    return f"closedloop: {steps} period(s) written to {out}"


def cmd_koopman(args) -> str:
    path = Path(args.config)
    data = cfgmod.load_json(path)
    reports = []
    for i, chk in enumerate(data.get("linear", [])):
        T = float(args.T if args.T is not None else cfgmod._require(chk, "T", f"linear[{i}]"))
        grid = GridSpec(T, int(args.N if args.N is not None else chk.get("N", 256)))
        icfg = cfgmod.integrator_from(chk, grid, args.method)
        pairs = [cfgmod.eigenpair_from_dict(p) for p in cfgmod._require(chk, "pairs", f"linear[{i}]")]
        try:
            rep = verify_linear_koopman(
                cfgmod._require(chk, "A", f"linear[{i}]"), T, pairs, icfg,
                side=chk.get("side", "left"),
                eig_tol=float(chk.get("eigen_tolerance", 1e-8)),
                lifted_tol=float(chk.get("tolerance", 1e-6)),
            )
        except BadEigenPair as exc:
            rep = {"kind": "linear", "error": str(exc), "passed": False}
        reports.append(rep)
    for i, chk in enumerate(data.get("nonlinear", [])):
        sys_ = cfgmod.system_from_dict(cfgmod._require(chk, "system", f"nonlinear[{i}]"))
        grid = cfgmod.grid_from_dict(chk.get("grid"), args.T, args.N)
        icfg = cfgmod.integrator_from(chk, grid, args.method)
        phi = Observable([cfgmod._require(chk, "phi", f"nonlinear[{i}]")], sys_.n)
        reports.append(nonlinear_eigenfunction_check(
            sys_, phi, cfgmod.parse_complex(cfgmod._require(chk, "lambda", f"nonlinear[{i}]")),
            cfgmod._require(chk, "t", f"nonlinear[{i}]"),
            cfgmod._require(chk, "x", f"nonlinear[{i}]"),
            icfg, tol=float(chk.get("tolerance", 1e-6)),
        ))
    if not reports:
        raise ConfigError("koopman config lists no 'linear' or 'nonlinear' checks")
    passed = all(r["passed"] for r in reports)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"passed": passed, "checks": reports}
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    n_ok = sum(r["passed"] for r in reports)
    summary = f"koopman: {n_ok}/{len(reports)} checks passed, report in {out / 'report.json'}"
    if not passed:
        raise CheckFailed(summary)
    return summary


COMMANDS = {
    "simulate": cmd_simulate,
    "lift": cmd_lift,
    "closedloop": cmd_closedloop,
    "koopman": cmd_koopman,
}


def _positive(kind):
    def conv(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value

    return conv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdlift", description="Lifting of nonlinear sampled-data systems."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "integrate the plant over one or more periods",
        "lift": "run the lifted plant and write per-period segments",
        "closedloop": "simulate the sampled-data feedback loop",
        "koopman": "check Koopman spectral correspondences",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="JSON definition file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--T", type=_positive(float), default=None, help="override sampling period")
        p.add_argument("--N", type=_positive(int), default=None, help="override subdivisions")
        p.add_argument("--method", choices=["euler", "rk4"], default=None)
        p.add_argument("--steps", type=_positive(int), default=None, help="number of periods")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = COMMANDS[args.command](args)
    except CheckFailed as exc:
        print(f"sdlift: {exc}", file=sys.stderr)
        print(exc)
        return EXIT_CHECK
    except BadEigenPair as exc:
        print(f"sdlift: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (DomainError, NonFiniteStateError, NonFiniteError, ContinuityError) as exc:
        print(f"sdlift: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ParseError, ShapeError, OutOfBoundsError, KeyError, TypeError,
            ValueError) as exc:
        print(f"sdlift: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
