"""Kernel backend selection.

The compiled extension is used when importable; set ``ISQ_PURE_PYTHON=1`` to
force the numpy fallback.
"""

import os

from . import _pykernels as python

if os.environ.get("ISQ_PURE_PYTHON"):
    compiled = None
else:
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

backend = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

env_marginal = backend.env_marginal
count_injective = backend.count_injective
polynomial_force = backend.polynomial_force
verlet_ensemble = backend.verlet_ensemble

__all__ = [
    "BACKEND",
    "compiled",
    "python",
    "env_marginal",
    "count_injective",
    "polynomial_force",
    "verlet_ensemble",
]
