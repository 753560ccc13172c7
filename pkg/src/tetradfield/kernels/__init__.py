"""Batched tensor kernels with a compiled core and a numpy fallback.

The compiled extension is used when it imports; set
``TETRADFIELD_PURE_PYTHON=1`` to force the numpy implementation.  All
wrappers accept arbitrary leading batch dimensions.
"""
import os

import numpy as np

from . import _numpy

try:
    if os.environ.get("TETRADFIELD_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _numpy
    BACKEND = "numpy"

__all__ = ["BACKEND", "connection_from_jet", "torsion_from_jet", "killing",
           "trace_vector", "killing_pullback", "get_backend"]


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ('cython' or 'numpy')."""
    if name is None:
        return _impl
    if name == "numpy":
        return _numpy
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def _flat(a, tail):
    a = np.ascontiguousarray(a, dtype=np.float64)
    lead = a.shape[:a.ndim - tail]
    return a.reshape((-1,) + a.shape[a.ndim - tail:]), lead


def connection_from_jet(frame, dcoframe):
    e, lead = _flat(frame, 2)
    de, _ = _flat(dcoframe, 3)
    out = _impl.connection_from_jet(e, de)
    return out.reshape(lead + out.shape[1:])


def torsion_from_jet(frame, dcoframe):
    e, lead = _flat(frame, 2)
    de, _ = _flat(dcoframe, 3)
    out = _impl.torsion_from_jet(e, de)
    return out.reshape(lead + out.shape[1:])


def killing(S):
    s, lead = _flat(S, 3)
    out = _impl.killing(s)
    return out.reshape(lead + out.shape[1:])


def trace_vector(S):
    s, lead = _flat(S, 3)
    out = _impl.trace_vector(s)
    return out.reshape(lead + out.shape[1:])


def killing_pullback(G, S):
    s, lead = _flat(S, 3)
    g, _ = _flat(G, 2)
    out = _impl.killing_pullback(g, s)
    return out.reshape(lead + out.shape[1:])
