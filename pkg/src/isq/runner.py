"""Configuration-driven scenarios with reproducible outputs.

A config is a YAML (or JSON) file::

    scenario: collision
    seed: 7
    output_dir: runs/collision
    format: csv          # csv | json, applies to tabular outputs
    params:
      n: 10
      m: 10000

Unknown keys are rejected. Every run writes its data files and then, last,
``manifest.json`` holding the resolved parameters and SHA-256 checksums.
Data files depend only on (config, seed); the manifest also records
timestamps, the worker count and the kernel backend.
"""

from __future__ import annotations

import datetime as _dt
import math
import os
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, _kernels
from . import classical, dilation, division, fock, quantum, stochastic
from .errors import ISQError, ModuleFailure, OutputDirUnwritable, SchemaViolation
from .io import atomic_write, dumps_json, propagator_to_dict, sha256_file, table_csv

FORMATS = ("csv", "json")


@dataclass(frozen=True)
class Param:
    kind: str  # int | float | str | floats | ints | matrix | any
    default: object
    doc: str


@dataclass(frozen=True)
class Scenario:
    name: str
    anchor: str
    description: str
    params: dict
    fn: Callable = field(repr=False)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    params: dict
    seed: int = 0
    output_dir: str = "."
    format: str = "csv"


@dataclass
class Output:
    result: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    files: dict = field(default_factory=dict)  # name -> json-able object, always JSON


def workers() -> int:
    try:
        return max(1, int(os.environ.get("ISQ_THREADS", "1")))
    except ValueError:
        return 1


# -- coercion ----------------------------------------------------------------


def _coerce(name: str, p: Param, value):
    try:
        if p.kind == "int":
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError
            return int(value)
        if p.kind == "float":
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if p.kind == "str":
            if not isinstance(value, str):
                raise ValueError
            return value
        if p.kind == "floats":
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            return [float(v) for v in value]
        if p.kind == "ints":
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            return [int(v) for v in value]
        if p.kind == "matrix":
            a = np.asarray(value, dtype=float)
            if a.ndim != 2:
                raise ValueError
            return [[float(x) for x in row] for row in a]
        return value
    except (TypeError, ValueError):
        raise SchemaViolation(f"parameter {name!r} expects {p.kind}, got {value!r}") from None


def resolve_params(scenario: Scenario, params: dict | None) -> dict:
    params = dict(params or {})
    unknown = sorted(set(params) - set(scenario.params))
    if unknown:
        raise SchemaViolation(f"unknown parameters for {scenario.name}: {', '.join(unknown)}")
    out = {}
    for name, p in scenario.params.items():
        value = params.get(name, p.default)
        out[name] = None if value is None else _coerce(name, p, value)
    return out


def load_config(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise OutputDirUnwritable(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise SchemaViolation(f"config {path} is not valid YAML: {exc}") from exc
    return config_from_dict(raw)


def config_from_dict(raw) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise SchemaViolation("config must be a mapping")
    allowed = {"scenario", "params", "seed", "output_dir", "format"}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise SchemaViolation(f"unknown config keys: {', '.join(unknown)}")
    name = raw.get("scenario")
    if name not in SCENARIOS:
        raise SchemaViolation(f"unknown scenario {name!r}")
    fmt = raw.get("format", "csv")
    if fmt not in FORMATS:
        raise SchemaViolation(f"format must be one of {FORMATS}, got {fmt!r}")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise SchemaViolation(f"seed must be an integer, got {seed!r}")
    params = raw.get("params") or {}
    if not isinstance(params, dict):
        raise SchemaViolation("params must be a mapping")
    resolve_params(SCENARIOS[name], params)
    return ScenarioConfig(name, params, seed, str(raw.get("output_dir", ".")), fmt)


# -- scenarios ------------------------------------------------------------------


def _verdict_dict(v: stochastic.DivisibilityVerdict) -> dict:
    return {
        "status": v.status,
        "witness": list(v.witness) if v.witness else None,
        "factor": None if v.factor is None else [[float(x) for x in row] for row in v.factor],
        "condition_number": v.condition_number,
    }


def _rabi(p, seed, rng):
    t1, t2 = p["t1"], p["t2"]
    fam = stochastic.rabi_family([t1, t2])
    verdict = stochastic.divisibility_witness(fam, t1, t2)
    rows = []
    for t in np.linspace(0, math.pi, p["scan_points"])[1:]:
        t = float(t)
        if math.isclose(t, t1):
            continue
        a, b = sorted((t1, t))
        v = stochastic.divisibility_witness(stochastic.rabi_family([a, b]), a, b)
        rows.append((a, b, v.status, float("nan") if v.witness is None else v.witness[2]))
    result = {"t1": t1, "t2": t2, "verdict": _verdict_dict(verdict)}
    return Output(result, {"scan": (["t1", "t2", "status", "violation"], rows)})


def _interference(p, seed, rng):
    dim, pairs = p["dim"], p["pairs"]
    worst = 0.0
    rows = []
    for k in range(pairs):
        a = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        b = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        d1, d2, cross = quantum.interference_decompose(a, b)
        total = np.abs(a + b) ** 2
        worst = max(worst, float(np.abs(d1 + d2 + cross - total).max()))
        if k == 0:
            rows = [(i, d1[i], d2[i], cross[i], total[i]) for i in range(dim)]
    return Output(
        {"pairs": pairs, "dim": dim, "max_identity_error": worst},
        {"first_pair": (["component", "direct1", "direct2", "cross", "total"], rows)},
    )


def _solution_dict(sol: dilation.DilationSolution) -> dict:
    return {
        "status": sol.status,
        "k": sol.dilation_factor,
        "residual": sol.residual,
        "gauge_fixed": sol.gauge_fixed,
        "unitary": propagator_to_dict(sol.unitary),
        "attempts": [
            {"k": a.k, "status": a.status, "best_residual": a.best_residual, "restart_residuals": list(a.restart_residuals)}
            for a in sol.attempts
        ],
    }


def _dilation(p, seed, rng):
    target = stochastic.validate_stochastic(p["matrix"])
    problem = dilation.DilationProblem(target, p["k_max"], p["tol"], p["restarts"], seed)
    sol = dilation.solve_unitary(problem, workers=workers())
    out = _solution_dict(sol)
    obstruction = None
    if target.dim <= 3 and target.is_doubly_stochastic():
        r = dilation.obstruction_test_3x3(target)
        obstruction = {"status": r.status, "rows": list(r.rows) if r.rows else None, "gap": r.gap}
    return Output({"status": sol.status, "k": sol.dilation_factor, "residual": sol.residual, "obstruction": obstruction}, files={"solution": out})


def _make_map(spec, n, m, rng):
    if spec == "identity":
        if m < n:
            raise ModuleFailure("identity map needs env_dim >= system_dim")
        return np.arange(n)
    if spec == "constant":
        return np.zeros(n, dtype=int)
    if spec == "random":
        return rng.integers(0, m, size=n)
    if spec == "random-injective":
        return rng.permutation(m)[:n]
    return np.asarray([int(x) for x in str(spec).split(",")])


def _division(p, seed, rng):
    n, m = p["n"], p["m"]
    cmap = division.CorrelationMap(n, m, _make_map(p["map"], n, m, rng))
    hs = quantum.random_hermitian(n, rng, p["scale"])
    he = quantum.random_hermitian(m, rng, p["scale"])
    psi = np.ones(n, dtype=complex) / math.sqrt(n)
    js = division.JointSystem(hs, he, cmap, quantum.StateVector(psi), p["t0"])
    rep = division.division_report(js, p["t"])
    rows = [(i, rep.exact_marginal.entries[i], rep.division_formula.entries[i]) for i in range(n)]
    result = {
        "n": n,
        "m": m,
        "map": [int(x) for x in cmap.map],
        "injective": rep.injective,
        "max_error": rep.max_error,
        "collision_probability_exact": division.collision_probability_exact(n, m),
    }
    return Output(result, {"marginals": (["config", "exact", "division"], rows)})


def _collision(p, seed, rng):
    n, m = p["n"], p["m"]
    exact = division.collision_probability_exact(n, m)
    approx = division.collision_probability_approx(n, m)
    rel = abs(approx - exact) / exact if exact > 0 else float("inf")
    freq, se = division.injectivity_frequency(n, m, p["draws"], rng) if p["draws"] else (float("nan"), float("nan"))
    row = (n, m, exact, approx, rel, freq, se)
    header = ["n", "m", "exact", "approx", "rel_error", "mc_frequency", "mc_stderr"]
    return Output(dict(zip(header, row)), {"collision": (header, [row])})


def _collapse(p, seed, rng):
    n, m = p["n"], p["m"]
    cmap = division.CorrelationMap(n, m, _make_map(p["map"], n, m, rng))
    prior = np.asarray(p["prior"] if p["prior"] else np.full(n, 1.0 / n), dtype=float)
    joint = division.joint_distribution(stochastic.probability_vector(prior), cmap)
    post = division.collapse_condition(joint, p["observed_e"])
    rows = [(i, prior[i], post.entries[i]) for i in range(n)]
    result = {"map": [int(x) for x in cmap.map], "observed_e": p["observed_e"], "injective": cmap.injective, "posterior": [float(x) for x in post.entries]}
    return Output(result, {"posterior": (["config", "prior", "posterior"], rows)})


def _classical(p, seed, rng):
    w = workers()
    cm_rows = []
    for N in p["n_list"]:
        spec = classical.EnsembleSpec(N=N, dimension=p["dimension"], sigma0=p["sigma0"], seed=seed)
        st = classical.cm_statistics(spec, p["samples"], workers=w)
        cm_rows.append((N, st.variance, st.stderr, spec.cm_variance()))
    pot = classical.PotentialSpec(p["potential"], p["k"], p["lambda"] if p["potential"] == "quartic" else 0.0)
    base = classical.EnsembleSpec(N=p["n_list"][0], dimension=p["dimension"], sigma0=p["sigma0"], seed=seed)
    sc = classical.ehrenfest_scaling(pot, base, p["n_list"], t_end=p["t_end"], dt=p["dt"], samples=p["ensemble_samples"])
    eh_rows = list(zip(sc.N, sc.deviations))
    result = {
        "radial_moment": classical.radial_moment(p["a"], p["C"]),
        "ehrenfest_slope": sc.fit.slope,
        "ehrenfest_slope_stderr": sc.fit.slope_stderr,
        "metadata": {"seed": seed, "dt": p["dt"], "t_end": p["t_end"], "truncation": None},
    }
    return Output(
        result,
        {
            "cm": (["N", "estimate", "stderr", "expected"], cm_rows),
            "ehrenfest": (["N", "deviation"], eh_rows),
        },
    )


def scattering_rows(p) -> tuple[list, dict]:
    basis = fock.build_fock_basis(p["L"], p["n_max"], p["max_particles"])
    H = fock.pair_creation_interaction(basis, p["g"])
    i, f = basis.parse_state(p["in"]), basis.parse_state(p["out"])
    rows = []
    for order in range(p["order"] + 1):
        exp = fock.dyson_propagator(H, 0.0, p["t"], order, p["quad"])
        terms = fock.term_interference(exp, i, f)
        a = terms.amplitudes[-1]
        rows.append((order, float(a.real), float(a.imag), float(abs(a) ** 2), terms.total, exp.unitarity_defect))
    info = {"states": basis.size, "in_index": i, "out_index": f}
    return rows, info


SCATTER_HEADER = ["order", "re_A", "im_A", "abs2_A", "cumulative_probability", "unitarity_defect"]


def _scattering(p, seed, rng):
    rows, info = scattering_rows(p)
    tables = {"orders": (SCATTER_HEADER, rows)}
    if p["L_sweep"]:
        sweep = fock.box_sweep(p["L_sweep"], p["n_max"], p["max_particles"], p["g"], p["t"], p["order"], p["quad"], p["in"], p["out"])
        tables["box_sweep"] = (["L", "probability", "unitarity_defect"], sweep)
    return Output({**info, "probability": rows[-1][4]}, tables)


SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in [
        Scenario(
            "rabi-indivisibility",
            "stochastic process",
            "Right-factor divisibility test on the two-level Rabi transition law.",
            {
                "t1": Param("float", math.pi / 8, "earlier time"),
                "t2": Param("float", math.pi / 4, "later time"),
                "scan_points": Param("int", 17, "grid points for the t2 scan over (0, pi]"),
            },
            _rabi,
        ),
        Scenario(
            "interference",
            "superposition principle",
            "Direct/cross decomposition of |psi1 + psi2|^2 on random branch pairs.",
            {"dim": Param("int", 4, "vector length"), "pairs": Param("int", 1000, "random pairs")},
            _interference,
        ),
        Scenario(
            "dilation",
            "unistochastic form and phase gauge",
            "Unitary preimage search with dilation and gauge fixing.",
            {
                "matrix": Param("matrix", [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]], "target stochastic matrix"),
                "k_max": Param("int", 4, "largest dilation factor"),
                "restarts": Param("int", 20, "random restarts per factor"),
                "tol": Param("float", 1e-8, "residual tolerance"),
            },
            _dilation,
        ),
        Scenario(
            "division",
            "measurement devices and the environment",
            "Exact system marginal vs the division-event formula after perfect correlation.",
            {
                "n": Param("int", 4, "system configurations"),
                "m": Param("int", 64, "environment configurations"),
                "map": Param("str", "random", "identity | constant | random | random-injective | comma list"),
                "scale": Param("float", 1.0, "scale of the random Hamiltonians"),
                "t0": Param("float", 0.0, "end of interaction"),
                "t": Param("float", 1.0, "evaluation time"),
            },
            _division,
        ),
        Scenario(
            "collision",
            "probability of distinct environment assignments",
            "Exact and approximate P(n, m) with a Monte Carlo check.",
            {
                "n": Param("int", 10, "system configurations"),
                "m": Param("int", 10000, "environment configurations"),
                "draws": Param("int", 100000, "Monte Carlo maps (0 to skip)"),
            },
            _collision,
        ),
        Scenario(
            "collapse",
            "wavefunction collapse",
            "Bayesian conditioning of the system on an environment outcome.",
            {
                "n": Param("int", 4, "system configurations"),
                "m": Param("int", 8, "environment configurations"),
                "map": Param("str", "identity", "identity | constant | random | random-injective | comma list"),
                "prior": Param("floats", None, "prior system law (default uniform)"),
                "observed_e": Param("int", 0, "observed environment configuration"),
            },
            _collapse,
        ),
        Scenario(
            "classical-limit",
            "macroscopic systems and the Ehrenfest equation",
            "Centre-of-mass variance scaling and Ehrenfest-vs-Newton deviation.",
            {
                "n_list": Param("ints", [1, 10, 100, 1000], "particle counts"),
                "sigma0": Param("float", 1.0, "single-particle variance"),
                "samples": Param("int", 100000, "centre-of-mass samples"),
                "dimension": Param("int", 1, "spatial dimension"),
                "potential": Param("str", "quartic", "harmonic | quartic"),
                "k": Param("float", 1.0, "harmonic coefficient"),
                "lambda": Param("float", 0.1, "quartic coefficient"),
                "t_end": Param("float", 10.0, "integration time"),
                "dt": Param("float", 1e-3, "time step"),
                "ensemble_samples": Param("int", 2000, "stochastic trajectories (even)"),
                "a": Param("float", 1.0, "radial weight exponent"),
                "C": Param("float", 1.0, "radial weight prefactor"),
            },
            _classical,
        ),
        Scenario(
            "scattering",
            "scattering process",
            "Dyson-series amplitudes by order for the toy pair-creation coupling.",
            {
                "L": Param("float", 10.0, "box side"),
                "n_max": Param("int", 3, "number of momentum modes"),
                "max_particles": Param("int", 2, "occupancy cap"),
                "g": Param("float", 0.1, "coupling strength"),
                "t": Param("float", 1.0, "evolution time"),
                "order": Param("int", 3, "Dyson order (<= 4)"),
                "quad": Param("int", 64, "quadrature nodes"),
                "in": Param("str", "vacuum", "in state"),
                "out": Param("str", "1,1", "out state (mode numbers)"),
                "L_sweep": Param("floats", None, "optional box sizes for a convergence sweep"),
            },
            _scattering,
        ),
    ]
}


def list_scenarios() -> list[dict]:
    return [
        {
            "name": s.name,
            "anchor": s.anchor,
            "description": s.description,
            "params": {k: {"type": p.kind, "default": p.default, "doc": p.doc} for k, p in s.params.items()},
        }
        for s in SCENARIOS.values()
    ]


@dataclass(frozen=True)
class RunManifest:
    scenario: str
    params: dict
    seed: int
    version: str
    started: str
    finished: str
    outputs: list
    workers: int
    backend: str
    path: Path

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "params": self.params,
            "seed": self.seed,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "outputs": self.outputs,
            "workers": self.workers,
            "backend": self.backend,
        }


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _table_text(fmt: str, header, rows) -> str:
    if fmt == "csv":
        return table_csv(header, rows)
    recs = [dict(zip(header, (x.item() if isinstance(x, np.generic) else x for x in row))) for row in rows]
    return dumps_json(recs)


def run_scenario(config: ScenarioConfig, output_dir=None) -> RunManifest:
    """Execute one scenario and write its outputs plus ``manifest.json``."""
    scen = SCENARIOS.get(config.scenario)
    if scen is None:
        raise SchemaViolation(f"unknown scenario {config.scenario!r}")
    params = resolve_params(scen, config.params)
    out_dir = Path(output_dir or config.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OutputDirUnwritable(f"cannot write to {out_dir}: {exc}") from exc

    started = _now()
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), 0]))
    try:
        out = scen.fn(params, int(config.seed), rng)
    except ISQError as exc:
        if isinstance(exc, (ModuleFailure,)):
            raise
        raise ModuleFailure(f"{scen.name}: {type(exc).__name__}: {exc}") from exc
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise ModuleFailure(f"{scen.name}: {type(exc).__name__}: {exc}") from exc

    written = []
    try:
        written.append(atomic_write(out_dir / "result.json", dumps_json(out.result)))
        for name, obj in out.files.items():
            written.append(atomic_write(out_dir / f"{name}.json", dumps_json(obj)))
        ext = "csv" if config.format == "csv" else "json"
        for name, (header, rows) in out.tables.items():
            written.append(atomic_write(out_dir / f"{name}.{ext}", _table_text(config.format, header, rows)))
        outputs = [{"file": p.name, "sha256": sha256_file(p), "bytes": p.stat().st_size} for p in written]
        manifest = RunManifest(scen.name, params, int(config.seed), __version__, started, _now(), outputs, workers(), _kernels.BACKEND, out_dir / "manifest.json")
        atomic_write(manifest.path, dumps_json(manifest.as_dict()))
    except OSError as exc:
        raise OutputDirUnwritable(f"failed writing outputs to {out_dir}: {exc}") from exc
    return manifest
