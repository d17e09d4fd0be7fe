"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 spectrum not classifiable as an oscillator.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .ensemble import (DEFAULT_H, DEFAULT_PATHS, fit_complex_decay, fit_decay_rate, fit_report,
                       mean_observable_decay, simulate_paths)
from .errors import ClassificationError, ConfigError, StochIsoError
from .grid import build_grid
from .grid import write_csv
from .io import write_json
from .model import BUILTIN_NAMES, builtin_model, load_model_config
from .pipeline import REFERENCE_ROWS, analyze, border_mass, default_x0, table_row
from .spectral import CLAMP_RELATIVE

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CLASSIFY = 0, 2, 3, 4

_LEVELS = {"spectrum": 0, "fields": 1, "effective-field": 2, "simulate": 3, "pipeline": 4}


def _pair(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None
    return a, b


def _override(text):
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number in {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="stochiso", description=(
        "Stochastic phase and isostable coordinates of planar SDE oscillators "
        "from backward-operator spectra."))
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True,
                        help=f"builtin name ({', '.join(BUILTIN_NAMES)}) or path to a JSON model config")
    common.add_argument("--set", dest="overrides", type=_override, action="append", default=[],
                        metavar="NAME=VALUE", help="override a model parameter (repeatable)")
    common.add_argument("--grid", nargs=2, type=int, default=(101, 101), metavar=("N", "M"))
    common.add_argument("--k", type=int, default=12, help="number of eigenpairs to compute")
    common.add_argument("--out", required=True, help="existing output directory")
    common.add_argument("--phase-ref", type=_pair, default=None, metavar="X,Y",
                        help="point where the phase is zero (default: between the density mode and the right edge)")
    common.add_argument("--p0-clamp", type=float, default=CLAMP_RELATIVE,
                        help="tolerated negative stationary-density entries, relative to its maximum")
    common.add_argument("--isochrons", type=int, default=8, help="number of equally spaced isochrons")
    common.add_argument("--method", choices=("auto", "arnoldi", "dense"), default="auto")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--h", type=float, default=DEFAULT_H)
    sim.add_argument("--paths", type=int, default=DEFAULT_PATHS)
    sim.add_argument("--x0", type=_pair, default=None, metavar="X,Y",
                     help="initial point (default: where min(|Sigma|, |Q_plus|), each scaled by its maximum, peaks inside the bulk of the density)")
    sim.add_argument("--t-max", type=float, default=None, help="default: 3/|lambda_floq|, at most 20")
    sim.add_argument("--window", type=_pair, default=None, metavar="LO,HI",
                     help="fit window (default: [0.05, 2/3] * t_max, before the mean sinks into Monte Carlo noise)")
    sim.add_argument("--record-every", type=int, default=10, help="record the mean every n steps")

    sub.add_parser("spectrum", parents=[common], help="leading spectrum and spectral roles")
    sub.add_parser("fields", parents=[common], help="phase, isostable, density and level sets")
    sub.add_parser("effective-field", parents=[common], help="fields plus the effective vector field")
    sub.add_parser("simulate", parents=[common, sim], help="fields plus ensemble decay verification")
    sub.add_parser("pipeline", parents=[common, sim], help="everything, with a manifest")

    t = sub.add_parser("reproduce-table", help="five reference oscillators: computed vs published")
    t.add_argument("--grid-n", type=int, choices=(51, 101, 151), default=151)
    t.add_argument("--k", type=int, default=12)
    t.add_argument("--out", default=None, help="existing directory for table.json")
    return p


def _load_model(args):
    overrides = dict(args.overrides)
    if args.model in BUILTIN_NAMES:
        return builtin_model(args.model, overrides)
    if not Path(args.model).is_file():
        raise ConfigError(f"{args.model!r} is neither a builtin model ({', '.join(BUILTIN_NAMES)}) nor a file")
    return load_model_config(args.model, overrides)


def _out_dir(path):
    out = Path(path)
    if not out.is_dir():
        raise ConfigError(f"output directory {out} does not exist")
    return out


def _run_config(args, spec):
    cfg = {"command": args.command, "model": spec.to_dict(), "grid": list(args.grid), "k": args.k,
           "phase_ref": list(args.phase_ref) if args.phase_ref else None,
           "p0_clamp": args.p0_clamp, "isochrons": args.isochrons, "method": args.method}
    if hasattr(args, "seed"):
        cfg.update(seed=args.seed, h=args.h, paths=args.paths,
                   x0=list(args.x0) if args.x0 else None, t_max=args.t_max,
                   window=list(args.window) if args.window else None, record_every=args.record_every)
    return cfg


def config_hash(cfg) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _versions():
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "artifact": pkg}


def _write_fields(a, out, written):
    a.psi.to_csv(out / "psi.csv")
    a.Sigma.with_values(a.Sigma.values.real).to_csv(out / "sigma.csv")
    a.P0.to_csv(out / "p0.csv")
    written += ["psi.csv", "sigma.csv", "p0.csv"]
    for i, c in enumerate(a.sigma0):
        c.to_csv(out / f"sigma0_{i}.csv")
        written.append(f"sigma0_{i}.csv")
    for v, found in a.isochrons.items():
        # one phase value can give several pieces; the third column tells them apart
        name = f"isochron_{round(1000 * v):04d}.csv"
        rows = [np.column_stack([c.vertices, np.full(len(c), i)]) for i, c in enumerate(found)]
        write_csv(out / name, "x,y,piece", np.vstack(rows) if rows else np.empty((0, 3)))
        written.append(name)


def _simulate(args, a, out, written, log):
    spec, roles = a.spec, a.roles
    x0 = args.x0 if args.x0 is not None else default_x0(a.Sigma, a.roles.Q_plus, a.P0)
    t_max = args.t_max if args.t_max is not None else min(3.0 / abs(roles.lambda_floq), 20.0)
    window = args.window if args.window is not None else (0.05 * t_max, 2 * t_max / 3)
    log(f"simulating {args.paths} paths from x0={x0} to t={t_max:g} with h={args.h:g}")
    paths = simulate_paths(spec, x0, args.h, t_max, args.paths, args.seed, args.record_every)
    stats = mean_observable_decay(paths, a.Sigma, a.grid)
    stats.to_csv(out / "decay_stats.csv")
    rate, err = fit_decay_rate(stats, *window)
    write_json(out / "fit.json", fit_report(rate, err, window, roles.lambda_floq))
    qstats = mean_observable_decay(paths, a.roles.Q_plus, a.grid)
    qstats.to_csv(out / "decay_stats_q.csv")
    mu, mu_err, om, om_err = fit_complex_decay(qstats, *window)
    write_json(out / "fit_q.json", {"mu": mu, "mu_stderr": mu_err, "omega": om, "omega_stderr": om_err,
                                     "window": list(window), "mu_ref": roles.mu, "omega_ref": roles.omega,
                                     "excluded_paths": stats.excluded})
    written += ["decay_stats.csv", "fit.json", "decay_stats_q.csv", "fit_q.json"]
    log(f"Sigma decay rate {rate:.6g} +- {err:.2g} (spectral {roles.lambda_floq:.6g}); "
        f"Q+ mu {mu:.6g} omega {om:.6g}")


def run_analysis(args, log=print):
    level = _LEVELS[args.command]
    spec = _load_model(args)
    out = _out_dir(args.out)
    N, M = args.grid
    grid = build_grid(spec.domain, N, M)
    log(f"{spec.name}: {N}x{M} grid, boundary {spec.boundary}")
    a = analyze(spec, grid, k=args.k, phase_ref=args.phase_ref, n_isochrons=args.isochrons,
                clamp_relative=args.p0_clamp, fields=level >= 1, effective=level >= 2, method=args.method)
    log(a.roles.report())
    if a.P0 is not None:
        log(f"density mass within one cell of the border: {border_mass(a.P0):.3g}")
    written = ["spectrum.json", "roles.json"]
    write_json(out / "spectrum.json", a.backward.to_json())
    write_json(out / "roles.json", a.roles.to_json())
    if level >= 1:
        _write_fields(a, out, written)
    if level >= 2:
        a.F.to_csv(out / "effective_field.csv")
        written.append("effective_field.csv")
    if level >= 3:
        _simulate(args, a, out, written, log)
    if level >= 4:
        cfg = _run_config(args, spec)
        write_json(out / "manifest.json", {"config": cfg, "config_sha256": config_hash(cfg),
                                           "versions": _versions(), "files": written})
    return a


def run_table(args, log=print):
    out = _out_dir(args.out) if args.out else None
    rows = []
    header = f"{'row':<9} {'':>9} {'mu':>10} {'omega':>10} {'lambda_floq':>12}"
    log(f"grid {args.grid_n}x{args.grid_n}")
    log(header)
    try:
        for label, name, overrides, ref in REFERENCE_ROWS:
            row = table_row(label, name, overrides, ref, args.grid_n, k=args.k)
            rows.append(row)
            c, r = row.computed, row.reference
            log(f"{label:<9} {'computed':>9} {c[0]:10.4f} {c[1]:10.4f} {c[2]:12.4f}")
            log(f"{'':<9} {'reference':>9} {r[0]:10.3f} {r[1]:10.3f} {r[2]:12.3f}")
            log(f"{'':<9} {'abs diff':>9} " + " ".join(f"{d:10.2e}" for d in row.abs_diff[:2])
                + f" {row.abs_diff[2]:12.2e}")
            log(f"{'':<9} {'rel diff':>9} " + " ".join(f"{d:10.2%}" for d in row.rel_diff[:2])
                + f" {row.rel_diff[2]:12.2%}")
    finally:
        if out is not None:
            write_json(out / "table.json", {"grid_n": args.grid_n, "complete": len(rows) == len(REFERENCE_ROWS),
                                            "rows": [r.to_json() for r in rows]})
    if args.grid_n < 151:
        log("note: published values were computed at 151x151; coarser grids deviate more")
    return rows


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    log = lambda msg: print(msg, file=sys.stderr)  # noqa: E731
    try:
        if args.command == "reproduce-table":
            run_table(args, log=print)
        else:
            run_analysis(args, log=log)
    except ConfigError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ClassificationError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_CLASSIFY
    except StochIsoError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
