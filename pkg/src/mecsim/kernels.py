"""Backend selection for the lookahead search.

The compiled extension is used when it imports; set ``MECSIM_PURE_PYTHON=1``
to force the interpreted fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _lookahead_py

_compiled = None
if os.environ.get("MECSIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _lookahead as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def pack_stages(stages) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    arrays = [np.ascontiguousarray(s, dtype=float) for s in stages]
    offsets = np.zeros(len(arrays), dtype=np.int64)
    pos = 0
    for n, a in enumerate(arrays):
        offsets[n] = pos
        pos += a.size
    ncols = np.array([a.shape[1] for a in arrays], dtype=np.int64)
    flat = np.concatenate([a.ravel() for a in arrays]) if arrays else np.zeros(0)
    return flat, offsets, ncols


def tree_search(stages, harvest, B0, B_low, B_up, B_max, backend: str | None = None):
    """Dispatch to the compiled or the pure-Python tree search."""
    backend = backend or BACKEND
    harvest = [float(h) for h in harvest]
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled lookahead extension is not available")
        flat, offsets, ncols = pack_stages(stages)
        return _compiled.tree_search(flat, offsets, ncols, np.asarray(harvest), float(B0),
                                     float(B_low), float(B_up), float(B_max))
    rows = [np.asarray(s, dtype=float).tolist() for s in stages]
    return _lookahead_py.tree_search(rows, harvest, float(B0), float(B_low), float(B_up), float(B_max))


def dp_search(stages, harvest, B0, B_low, B_up, B_max):
    rows = [np.asarray(s, dtype=float).tolist() for s in stages]
    return _lookahead_py.dp_search(rows, [float(h) for h in harvest], B0, B_low, B_up, B_max)


def available_backends() -> list[str]:
    return ["python"] + (["compiled"] if _compiled is not None else [])
