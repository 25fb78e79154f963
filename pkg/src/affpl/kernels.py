"""Selects the compiled speedup kernels, falling back to pure Python.

The compiled extension (affpl._speedups, Cython) and affpl._fallback
implement the same routines with the same evaluation order; which one is
active is reported by IMPL / HAVE_SPEEDUPS. Set AFFPL_FORCE_FALLBACK=1 to
ignore the extension (used by the parity tests and the benchmark).
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("AFFPL_FORCE_FALLBACK", "0") == "1":
    from . import _fallback as _impl
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _fallback as _impl

IMPL: str = _impl.IMPL
HAVE_SPEEDUPS: bool = IMPL == "cython"

masses = _impl.masses
node_mass = _impl.node_mass
ascent_sweep = _impl.ascent_sweep


def grid_index_map(domain) -> tuple[np.ndarray, int, int]:
    """Dense (i, j) -> node index map for kernel lattice lookups."""
    ij = domain.ij
    gi0 = int(ij[:, 0].min())
    gj0 = int(ij[:, 1].min())
    gh = int(ij[:, 0].max()) - gi0 + 1
    gw = int(ij[:, 1].max()) - gj0 + 1
    grid = np.full((gh, gw), -1, dtype=np.int64)
    grid[ij[:, 0] - gi0, ij[:, 1] - gj0] = np.arange(len(ij), dtype=np.int64)
    return grid, gi0, gj0
