"""JSON and CSV formats for matrices, states and tables.

Real matrices:    {"dim": C, "entries": [row-major], "time": t}
Complex matrices: {"dim": C, "re": [row-major], "im": [row-major], "time": t}
                  (Hermitian operators omit "time")
State vectors:    {"dim": C, "re": [...], "im": [...]}
Correlation maps: {"system_dim": n, "env_dim": m, "map": [...]}

Readers accept either flat row-major lists or nested lists of rows.
Writers use Python's shortest round-trip float repr, so a write/read cycle
reproduces every value exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .division import CorrelationMap
from .errors import DimensionMismatch, ValidationError
from .quantum import HermitianOperator, Propagator, StateVector, as_propagator
from .stochastic import ProbabilityVector, StochasticMatrix, validate_stochastic


def _square(values, dim: int) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim == 1:
        if a.size != dim * dim:
            raise DimensionMismatch(f"{a.size} entries for a {dim}x{dim} matrix")
        a = a.reshape(dim, dim)
    if a.shape != (dim, dim):
        raise DimensionMismatch(f"matrix of shape {a.shape}, header says dim {dim}")
    return a


def _floats(a) -> list[float]:
    return [float(x) for x in np.asarray(a).ravel()]


def stochastic_to_dict(gamma: StochasticMatrix) -> dict:
    return {"dim": gamma.dim, "entries": _floats(gamma.entries), "time": gamma.time}


def stochastic_from_dict(obj: dict) -> StochasticMatrix:
    dim = int(obj["dim"])
    return validate_stochastic(_square(obj["entries"], dim), time=float(obj.get("time", 0.0)))


def complex_to_dict(m, time: float | None = None) -> dict:
    a = np.asarray(getattr(m, "entries", m), dtype=complex)
    out = {"dim": a.shape[0], "re": _floats(a.real), "im": _floats(a.imag)}
    if time is not None:
        out["time"] = float(time)
    return out


def complex_matrix_from_dict(obj: dict) -> np.ndarray:
    dim = int(obj["dim"])
    im = obj.get("im")
    re = _square(obj["re"], dim)
    return re + 1j * (_square(im, dim) if im is not None else 0.0)


def propagator_to_dict(u: Propagator) -> dict:
    return complex_to_dict(u.entries, u.time)


def propagator_from_dict(obj: dict) -> Propagator:
    return as_propagator(complex_matrix_from_dict(obj), float(obj.get("time", 0.0)))


def hermitian_to_dict(h: HermitianOperator) -> dict:
    return complex_to_dict(h.entries)


def hermitian_from_dict(obj: dict) -> HermitianOperator:
    if "time" in obj:
        raise ValidationError("Hermitian operators carry no time field")
    return HermitianOperator(complex_matrix_from_dict(obj))


def state_to_dict(psi: StateVector) -> dict:
    a = psi.amplitudes
    return {"dim": a.shape[0], "re": _floats(a.real), "im": _floats(a.imag)}


def state_from_dict(obj: dict) -> StateVector:
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    if re.shape != (int(obj["dim"]),) or im.shape != re.shape:
        raise DimensionMismatch("state vector length does not match dim")
    return StateVector(re + 1j * im)


def map_to_dict(cmap: CorrelationMap) -> dict:
    return {"system_dim": cmap.system_dim, "env_dim": cmap.env_dim, "map": [int(x) for x in cmap.map]}


def map_from_dict(obj: dict) -> CorrelationMap:
    return CorrelationMap(int(obj["system_dim"]), int(obj["env_dim"]), np.asarray(obj["map"]))


# -- files -----------------------------------------------------------------


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps_json(obj))


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def probability_csv(p: ProbabilityVector, labels=None) -> str:
    vals = p.entries if isinstance(p, ProbabilityVector) else np.asarray(p, dtype=float)
    names = labels if labels is not None else range(len(vals))
    return table_csv(["config", "probability"], zip(names, (float(v) for v in vals)))


def read_probability_csv(path) -> ProbabilityVector:
    from .stochastic import probability_vector

    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["config", "probability"]:
            raise ValidationError(f"unexpected header {header}")
        return probability_vector([float(row[1]) for row in r])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
