"""Backend selection for the hot loops.

``HARNACK_LAB_BACKEND=numpy`` forces the pure-numpy path; the default is
numba when it imports. Callback operators always use numpy.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _numpy

try:
    from . import _numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    HAVE_NUMBA = False

BACKENDS = ("numba", "numpy")


def backend_name(name: str | None = None) -> str:
    name = (name or os.environ.get("HARNACK_LAB_BACKEND") or ("numba" if HAVE_NUMBA else "numpy")).lower()
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choose from {BACKENDS}")
    if name == "numba" and not HAVE_NUMBA:
        name = "numpy"
    return name


def get_backend(scenario=None, name: str | None = None) -> ModuleType:
    name = backend_name(name)
    if scenario is not None and scenario.operator.kind == "callback":
        return _numpy
    return _numba if name == "numba" else _numpy
