"""Dense LP solver with a compiled pivot kernel and a NumPy fallback.

The kernel is chosen at import time: the Cython extension when it was built
(and FMKT_PURE_PYTHON is unset), the NumPy implementation otherwise.  Both
produce identical pivot sequences; ``set_kernel`` switches explicitly, which
the benchmark uses to compare them.
"""

from .solver import (
    FEAS_TOL,
    PIVOT_TOL,
    LinearProgram,
    LPSolution,
    active_kernel,
    available_kernels,
    set_kernel,
    solve_lp,
)

__all__ = [
    "FEAS_TOL",
    "PIVOT_TOL",
    "LinearProgram",
    "LPSolution",
    "active_kernel",
    "available_kernels",
    "set_kernel",
    "solve_lp",
]
