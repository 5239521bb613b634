"""Pure NumPy simplex pivot loop; reference semantics for the compiled kernel.

Both kernels must choose identical pivots on identical tableaus: entering by
Dantzig's rule (most negative reduced cost, lowest column index on ties)
until the cumulative degenerate-pivot budget is spent, then Bland's rule;
leaving by minimum ratio with ties broken by smallest basic variable index.
"""

from __future__ import annotations

import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
ITER_LIMIT = 2

_DEGEN_EPS = 1e-12


def simplex_loop(
    T: np.ndarray,
    basis: np.ndarray,
    n_enterable: int,
    bland_threshold: int,
    pivot_tol: float,
    max_iter: int,
    degen_start: int = 0,
) -> tuple[int, int, int, int]:
    """Pivot the tableau in place until optimal or unbounded.

    T has shape (m+1, n+1): m constraint rows with the rhs in the last
    column (kept nonnegative), then the reduced-cost row of a minimization.
    Columns at index >= n_enterable (artificials) never enter the basis.
    Returns (status, entering_column, iterations, degenerate_pivots).
    """
    m = T.shape[0] - 1
    ncols = T.shape[1] - 1
    degen = degen_start
    costs = T[m, :n_enterable]
    for it in range(max_iter):
        if degen > bland_threshold:
            neg = np.flatnonzero(costs < -pivot_tol)
            if neg.size == 0:
                return OPTIMAL, -1, it, degen
            j = int(neg[0])
        else:
            j = int(np.argmin(costs))
            if costs[j] >= -pivot_tol:
                return OPTIMAL, -1, it, degen
        col = T[:m, j]
        rhs = T[:m, ncols]
        ratios = np.full(m, np.inf)
        mask = col > pivot_tol
        if not mask.any():
            return UNBOUNDED, j, it, degen
        ratios[mask] = rhs[mask] / col[mask]
        theta = ratios.min()
        ties = np.flatnonzero(ratios == theta)
        r = int(ties[np.argmin(basis[ties])])
        if theta <= _DEGEN_EPS:
            degen += 1

        piv = T[r, j]
        T[r, :] /= piv
        coef = T[:, j].copy()
        coef[r] = 0.0
        T -= np.outer(coef, T[r, :])
        basis[r] = j
    return ITER_LIMIT, -1, max_iter, degen
