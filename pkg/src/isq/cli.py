"""Command-line entry point ``isq``.

Exit codes: 0 success, 2 schema or argument error, 3 module failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__, _kernels, classical, dilation, division, runner
from .errors import ISQError, ModuleFailure, OutputDirUnwritable, SchemaViolation
from .io import (
    dumps_json,
    hermitian_from_dict,
    map_from_dict,
    propagator_from_dict,
    read_json,
    state_from_dict,
    stochastic_from_dict,
    table_csv,
    write_json,
)
from .quantum import StateVector

EXIT_OK, EXIT_SCHEMA, EXIT_MODULE, EXIT_IO = 0, 2, 3, 4


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _read(path):
    try:
        return read_json(path)
    except OSError as exc:
        raise OutputDirUnwritable(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path} is not valid JSON: {exc}") from exc


def _operator(obj):
    # a "time" field marks a fixed propagator, otherwise a Hermitian generator
    return propagator_from_dict(obj) if "time" in obj else hermitian_from_dict(obj)


def _emit(text: str, path):
    if path:
        try:
            from .io import atomic_write

            atomic_write(path, text)
        except OSError as exc:
            raise OutputDirUnwritable(f"cannot write {path}: {exc}") from exc
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------------


def cmd_run(args):
    cfg = runner.load_config(args.config)
    m = runner.run_scenario(cfg, args.output_dir)
    print(m.path)


def cmd_list(args):
    items = runner.list_scenarios()
    if args.json:
        sys.stdout.write(dumps_json(items))
        return
    for s in items:
        print(f"{s['name']:<22} {s['anchor']:<50} {s['description']}")


def cmd_dilate(args):
    gamma = stochastic_from_dict(_read(args.input))
    problem = dilation.DilationProblem(gamma, args.k_max, args.tol, args.restarts, args.seed)
    sol = dilation.solve_unitary(problem, workers=runner.workers())
    out = runner._solution_dict(sol)
    if args.out:
        write_json(args.out, out)
    print(f"status={sol.status} k={sol.dilation_factor} residual={sol.residual:.3e}")
    return EXIT_OK if sol.converged else EXIT_MODULE


def cmd_division(args):
    cmap = map_from_dict(_read(args.map))
    n = cmap.system_dim
    psi = state_from_dict(_read(args.psi)) if args.psi else StateVector(np.ones(n, dtype=complex) / math.sqrt(n))
    js = division.JointSystem(_operator(_read(args.sys)), _operator(_read(args.env)), cmap, psi, args.t0)
    rep = division.division_report(js, args.t)
    out = {
        "t0": args.t0,
        "t": args.t,
        "injective": rep.injective,
        "max_error": rep.max_error,
        "exact_marginal": [float(x) for x in rep.exact_marginal.entries],
        "division_formula": [float(x) for x in rep.division_formula.entries],
    }
    _emit(dumps_json(out), args.out)


def cmd_collide(args):
    exact = division.collision_probability_exact(args.n, args.m)
    approx = division.collision_probability_approx(args.n, args.m)
    rel = abs(approx - exact) / exact if exact > 0 else float("inf")
    _emit(table_csv(["n", "m", "exact", "approx", "rel_error"], [(args.n, args.m, exact, approx, rel)]), args.out)


def cmd_climit_cm(args):
    rows = []
    for N in args.n:
        spec = classical.EnsembleSpec(N=N, dimension=args.dimension, sigma0=args.sigma0, seed=args.seed)
        st = classical.cm_statistics(spec, args.samples, workers=runner.workers())
        rows.append((N, st.variance, st.stderr))
    _emit(table_csv(["N", "estimate", "stderr"], rows), args.csv)
    meta = {"seed": args.seed, "samples": args.samples, "sigma0": args.sigma0, "truncation": None, "dt": None, "backend": _kernels.BACKEND}
    if args.meta:
        write_json(args.meta, meta)


def cmd_climit_ehrenfest(args):
    lam = args.lam if args.potential == "quartic" else 0.0
    pot = classical.PotentialSpec(args.potential, args.k, lam)
    spec = classical.EnsembleSpec(N=args.n_list[0], dimension=args.dimension, sigma0=args.sigma0, seed=args.seed)
    sc = classical.ehrenfest_scaling(pot, spec, args.n_list, t_end=args.t_end, dt=args.dt, samples=args.samples)
    _emit(table_csv(["N", "deviation"], zip(sc.N, sc.deviations)), args.csv)
    meta = {
        "seed": args.seed,
        "truncation": None,
        "dt": args.dt,
        "t_end": args.t_end,
        "samples": args.samples,
        "slope": sc.fit.slope,
        "slope_stderr": sc.fit.slope_stderr,
        "backend": _kernels.BACKEND,
    }
    if args.meta:
        write_json(args.meta, meta)


def cmd_scatter(args):
    p = {
        "L": args.L,
        "n_max": args.n_max,
        "max_particles": args.max_particles,
        "g": args.g,
        "t": args.t,
        "order": args.order,
        "quad": args.quad,
        "in": args.in_state,
        "out": args.out_state,
    }
    rows, _ = runner.scattering_rows(p)
    _emit(table_csv(runner.SCATTER_HEADER, rows), args.csv)
    if args.L_sweep:
        from .fock import box_sweep

        sweep = box_sweep(args.L_sweep, args.n_max, args.max_particles, args.g, args.t, args.order, args.quad, args.in_state, args.out_state)
        _emit(table_csv(["L", "probability", "unitarity_defect"], sweep), args.sweep_csv)


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isq", description="Stochastic-quantum correspondence toolkit.")
    ap.add_argument("--version", action="version", version=f"isq {__version__} ({_kernels.BACKEND} kernels)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario config")
    p.add_argument("config")
    p.add_argument("--output-dir", default=None, help="override output_dir from the config")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("list", help="list scenarios")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_list)

    p = sub.add_parser("dilate", help="search for a unitary preimage")
    p.add_argument("--input", required=True)
    p.add_argument("--k-max", type=int, default=4)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_dilate)

    p = sub.add_parser("division", help="exact marginal vs division formula")
    p.add_argument("--sys", required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--psi", default=None)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_division)

    p = sub.add_parser("collide", help="distinct-assignment probability")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_collide)

    p = sub.add_parser("climit", help="classical-limit experiments")
    csub = p.add_subparsers(dest="experiment", required=True)
    c = csub.add_parser("cm", help="centre-of-mass variance")
    c.add_argument("--n", type=_ints, required=True, help="particle count(s), comma separated")
    c.add_argument("--sigma0", type=float, default=1.0)
    c.add_argument("--samples", type=int, default=100000)
    c.add_argument("--dimension", type=int, default=1)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--csv", default=None)
    c.add_argument("--meta", default=None)
    c.set_defaults(fn=cmd_climit_cm)
    c = csub.add_parser("ehrenfest", help="ensemble mean vs Newton")
    c.add_argument("--potential", choices=["harmonic", "quartic"], default="quartic")
    c.add_argument("--k", type=float, default=1.0)
    c.add_argument("--lambda", dest="lam", type=float, default=0.1)
    c.add_argument("--n-list", type=_ints, default=[10, 100, 1000])
    c.add_argument("--sigma0", type=float, default=1.0)
    c.add_argument("--dimension", type=int, default=1)
    c.add_argument("--t-end", type=float, default=10.0)
    c.add_argument("--dt", type=float, default=1e-3)
    c.add_argument("--samples", type=int, default=2000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--csv", default=None)
    c.add_argument("--meta", default=None)
    c.set_defaults(fn=cmd_climit_ehrenfest)

    p = sub.add_parser("scatter", help="Dyson-series transition amplitudes")
    p.add_argument("--L", type=float, default=10.0)
    p.add_argument("--n-max", type=int, default=3)
    p.add_argument("--max-particles", type=int, default=2)
    p.add_argument("--g", type=float, default=0.1)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--quad", type=int, default=64)
    p.add_argument("--in", dest="in_state", default="vacuum")
    p.add_argument("--out", dest="out_state", default="1,1")
    p.add_argument("--csv", default=None)
    p.add_argument("--L-sweep", type=_floats, default=None)
    p.add_argument("--sweep-csv", default=None)
    p.set_defaults(fn=cmd_scatter)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_SCHEMA
    try:
        code = args.fn(args)
    except SchemaViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:  # includes OutputDirUnwritable
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ModuleFailure, ISQError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODULE
    except KeyError as exc:
        print(f"error: missing field {exc} in input", file=sys.stderr)
        return EXIT_SCHEMA
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
