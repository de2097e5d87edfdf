"""Hot kernels: the compiled extension when available, numpy otherwise.

Set ``CWOTCE_PURE_PYTHON=1`` before import to force the numpy fallback.
Both raw backends are exposed as ``compiled`` (possibly ``None``) and
``fallback`` so they can be compared directly; ``use_backend`` switches the
active one at runtime.
"""

import os

import numpy as np

from . import _fallback as fallback

try:
    from . import _core as compiled
except ImportError:  # extension not built
    compiled = None

_active = None
BACKEND = None


def use_backend(name):
    """Select ``"compiled"`` or ``"python"``; returns the previous name."""
    global _active, BACKEND
    prev = BACKEND
    if name == "compiled":
        if compiled is None:
            raise RuntimeError("compiled kernels are not built")
        _active = compiled
    elif name == "python":
        _active = fallback
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name
    return prev


if compiled is not None and os.environ.get("CWOTCE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    use_backend("compiled")
else:
    use_backend("python")


def choquet_batch(profiles, cap_table):
    return _active.choquet_batch(
        np.ascontiguousarray(profiles, dtype=np.float64),
        np.ascontiguousarray(cap_table, dtype=np.float64),
    )


def doubled_midranks(x):
    return _active.doubled_midranks(np.ascontiguousarray(x, dtype=np.float64))


def pair_matrix(followup, death, offsets, events):
    return _active.pair_matrix(
        np.ascontiguousarray(followup, dtype=np.float64),
        np.ascontiguousarray(death, dtype=np.uint8),
        np.ascontiguousarray(offsets, dtype=np.int64),
        np.ascontiguousarray(events, dtype=np.float64),
    )


__all__ = [
    "BACKEND", "use_backend", "choquet_batch", "doubled_midranks", "pair_matrix",
    "compiled", "fallback",
]
