"""Self-contained dense two-phase primal simplex.

Solves min/max of c.x subject to equality rows, inequality (<=) rows, and
per-variable lower bounds of 0 or -infinity.  Free variables are split,
inequalities get slacks, and phase 1 introduces artificials only where no
natural basic column exists.  Bland's rule takes over after the degenerate
pivot budget 5*(rows+cols) is spent, which rules out cycling while keeping
Dantzig speed on typical instances.

Dual values are reported for every row under the convention that the dual
objective b_eq.y_eq + b_ub.y_ub equals the primal optimum for either sense;
inequality duals satisfy y_ub <= 0 for minimization and y_ub >= 0 for
maximization.  When the program is infeasible the certificate is a Farkas
vector y over the rows (y.b > 0 while y.A <= 0 on nonnegative variables and
y.A = 0 on free ones); when unbounded it is an improving feasible ray over
the variables.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..errors import SolverError, ValidationError
from . import _pivot_py

try:  # compiled kernel is optional; the fallback is pivot-identical
    from . import _pivot_cy
except ImportError:  # pragma: no cover - depends on build host
    _pivot_cy = None

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9

_KERNELS = {"python": _pivot_py.simplex_loop}
if _pivot_cy is not None:
    _KERNELS["compiled"] = _pivot_cy.simplex_loop

_active = (
    "compiled"
    if ("compiled" in _KERNELS and not os.environ.get("FMKT_PURE_PYTHON"))
    else "python"
)


def available_kernels() -> tuple[str, ...]:
    return tuple(sorted(_KERNELS))


def active_kernel() -> str:
    return _active


def set_kernel(name: str) -> None:
    global _active
    if name not in _KERNELS:
        raise ValueError(f"unknown kernel {name!r}; available: {available_kernels()}")
    _active = name


@dataclass(frozen=True)
class LinearProgram:
    sense: str
    c: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    free: np.ndarray | None = None  # True where the lower bound is -inf


@dataclass(frozen=True)
class LPSolution:
    status: str  # optimal | infeasible | unbounded
    objective: float | None = None
    x: np.ndarray | None = None
    duals_eq: np.ndarray | None = None
    duals_ub: np.ndarray | None = None
    certificate: np.ndarray | None = None
    iterations: int = 0


def _as_2d(a, n, what) -> np.ndarray:
    if a is None:
        return np.zeros((0, n))
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[1] != n:
        raise ValidationError(f"{what} must be a matrix with {n} columns")
    return a


def _as_1d(b, rows, what) -> np.ndarray:
    if b is None:
        return np.zeros(0)
    b = np.asarray(b, dtype=float)
    if b.shape != (rows,):
        raise ValidationError(f"{what} must have length {rows}")
    return b


def solve_lp(p: LinearProgram, max_iter: int | None = None) -> LPSolution:
    """Solve deterministically, in up to two rungs.

    The first rung runs Dantzig pricing on a tiny deterministic right-hand
    side perturbation: the cone programs in this package sit on massively
    degenerate vertices, and the perturbation keeps the pivot path short.
    The reported solution is unaffected because the epilogue recomputes
    everything exactly from the final basis on unperturbed data; if any
    guard trips, the second rung reruns unperturbed under Bland's rule.
    """
    try:
        return _solve(p, max_iter, bland_always=False, perturb=True)
    except SolverError:
        return _solve(p, max_iter, bland_always=True, perturb=False)


def _solve(
    p: LinearProgram, max_iter: int | None, bland_always: bool, perturb: bool
) -> LPSolution:
    if p.sense not in ("min", "max"):
        raise ValidationError(f"sense must be 'min' or 'max', got {p.sense!r}")
    c_user = np.asarray(p.c, dtype=float)
    if c_user.ndim != 1 or c_user.size == 0:
        raise ValidationError("objective must be a nonempty vector")
    n = c_user.size
    a_eq = _as_2d(p.a_eq, n, "a_eq")
    a_ub = _as_2d(p.a_ub, n, "a_ub")
    b_eq = _as_1d(p.b_eq, a_eq.shape[0], "b_eq")
    b_ub = _as_1d(p.b_ub, a_ub.shape[0], "b_ub")
    for arr, what in (
        (c_user, "c"),
        (a_eq, "a_eq"),
        (a_ub, "a_ub"),
        (b_eq, "b_eq"),
        (b_ub, "b_ub"),
    ):
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"non-finite coefficient in {what}")
    free = (
        np.zeros(n, dtype=bool) if p.free is None else np.asarray(p.free, dtype=bool)
    )
    if free.shape != (n,):
        raise ValidationError("free mask must match the variable count")

    sign = 1.0 if p.sense == "min" else -1.0
    me, mu = a_eq.shape[0], a_ub.shape[0]
    m = me + mu

    # Split free variables, append slacks: columns [x, x-(free only), slacks].
    nfree = int(free.sum())
    nsplit = n + nfree
    A = np.zeros((m, nsplit + mu))
    A[:me, :n] = a_eq
    A[me:, :n] = a_ub
    if nfree:
        A[:me, n:nsplit] = -a_eq[:, free]
        A[me:, n:nsplit] = -a_ub[:, free]
    A[me:, nsplit:] = np.eye(mu)
    b = np.concatenate([b_eq, b_ub])
    c_split = np.zeros(nsplit + mu)
    c_split[:n] = sign * c_user
    if nfree:
        c_split[n:nsplit] = -sign * c_user[free]

    flip = b < 0.0
    A[flip] *= -1.0
    b = np.abs(b)

    # Natural basic columns: slacks of rows that were not flipped.
    basis = np.full(m, -1, dtype=np.int64)
    for i in range(me, m):
        if not flip[i]:
            basis[i] = nsplit + (i - me)
    need_art = np.flatnonzero(basis < 0)
    nart = need_art.size
    art_start = nsplit + mu
    ncols = art_start + nart

    # Flipped-space matrix extended with artificial identity columns; used
    # by the pivot tableau and again for dual extraction.
    A_ext = np.zeros((m, ncols))
    A_ext[:, :art_start] = A
    for k, i in enumerate(need_art):
        A_ext[i, art_start + k] = 1.0
        basis[i] = art_start + k

    delta = np.zeros(m)
    if perturb and m:
        delta = 1e-10 * (1.0 + float(np.abs(b).max())) * (1.0 + np.arange(m))

    T = np.zeros((m + 1, ncols + 1))
    T[:m, :ncols] = A_ext
    T[:m, -1] = b + delta

    if max_iter is None:
        max_iter = 5000 + 200 * (m + ncols)
    bland_threshold = -1 if bland_always else 5 * (m + ncols)
    kernel = _KERNELS[_active]

    # Phase 1: minimize the sum of artificials.  When every artificial row
    # has a zero right-hand side the start is already optimal (the sum is 0
    # and cannot go lower); running the pivot loop anyway only grinds
    # through degenerate pivots and accumulates roundoff.
    degen = 0
    it1 = 0
    if nart and float(b[need_art].sum()) > FEAS_TOL:
        T[m, :] = -T[need_art, :].sum(axis=0)
        T[m, art_start:ncols] = 0.0
        status, _, it1, degen = kernel(
            T, basis, art_start, bland_threshold, PIVOT_TOL, max_iter
        )
        if status == _pivot_py.ITER_LIMIT:
            raise SolverError("phase-1 iteration limit reached")
        if status == _pivot_py.UNBOUNDED:
            # the artificial sum is bounded below by zero; this is roundoff
            raise SolverError("phase-1 numerical breakdown")
        # judge infeasibility from the exact basic solution, not the
        # pivoted rhs column (long degenerate runs drift it)
        vals = _basic_values(A_ext, basis, b)
        ph1 = float(np.maximum(vals[basis >= art_start], 0.0).sum())
        if ph1 > FEAS_TOL:
            costs1 = np.zeros(ncols)
            costs1[art_start:] = 1.0
            y = _duals(A_ext, flip, basis, costs1)
            return LPSolution(status="infeasible", certificate=y, iterations=it1)

    # Drive zero-valued artificials out of the basis; rows that cannot pivot
    # on a real column are redundant and dropped for phase 2.  The threshold
    # is far above roundoff: a reduced row with only ~1e-9 entries is noise
    # from an exactly dependent row, and pivoting on it corrupts the basis.
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] < art_start:
            continue
        cand = np.flatnonzero(np.abs(T[i, :art_start]) > 1e-7)
        if cand.size == 0:
            keep[i] = False
            continue
        j = int(cand[0])
        piv = T[i, j]
        T[i, :] /= piv
        coef = T[:, j].copy()
        coef[i] = 0.0
        T -= np.outer(coef, T[i, :])
        basis[i] = j

    # Refactorize for phase 2: rebuild the tableau exactly from the original
    # (flipped) matrix under the drive-out basis, so phase-1 tableau drift
    # does not carry over.
    row_keep = np.flatnonzero(keep)
    m2 = row_keep.size
    basis2 = basis[row_keep].copy()
    A2 = A_ext[np.ix_(row_keep, np.arange(art_start))]
    B2 = A2[:, basis2]
    try:
        body = np.linalg.solve(B2, np.hstack([A2, b[row_keep, None]]))
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"degenerate basis after phase 1: {exc}") from exc
    rhs2 = body[:, -1]
    if float(rhs2.min(initial=0.0)) < -1e-7:
        raise SolverError("phase-1 basis is infeasible on exact recompute")
    T2 = np.zeros((m2 + 1, art_start + 1))
    T2[:m2, :art_start] = body[:, :art_start]
    T2[:m2, -1] = np.maximum(rhs2, 0.0)
    if perturb and m2:
        T2[:m2, -1] += 1e-10 * (1.0 + float(np.abs(b).max())) * (
            1.0 + np.arange(m2)
        )

    # Phase 2 reduced costs: price out the basic columns.
    T2[m2, :art_start] = c_split
    for i in range(m2):
        cb = c_split[basis2[i]]
        if cb != 0.0:
            T2[m2, :] -= cb * T2[i, :]

    status, enter, it2, _ = kernel(
        T2, basis2, art_start, bland_threshold, PIVOT_TOL, max_iter, degen
    )
    iters = it1 + it2
    if status == _pivot_py.ITER_LIMIT:
        raise SolverError("phase-2 iteration limit reached")

    if status == _pivot_py.UNBOUNDED:
        d = np.zeros(art_start)
        d[enter] = 1.0
        d[basis2] = -T2[:m2, enter]
        ray = d[:n].copy()
        if nfree:
            ray[free] -= d[n:nsplit]
        return LPSolution(status="unbounded", certificate=ray, iterations=iters)

    # The pivot path fixes the final basis; the reported solution and duals
    # are recomputed exactly from the original matrix with that basis, so
    # tableau drift over long degenerate runs cannot leak into the output.
    full_basis = basis.copy()
    full_basis[row_keep] = basis2  # dropped rows keep their artificial column
    z = np.zeros(ncols)
    z[full_basis] = _basic_values(A_ext, full_basis, b)
    x = z[:n].copy()
    if nfree:
        x[free] -= z[n:nsplit]
    objective = float(c_user @ x)

    costs2 = np.zeros(ncols)
    costs2[:art_start] = c_split
    y = sign * _duals(A_ext, flip, full_basis, costs2)
    sol = LPSolution(
        status="optimal",
        objective=objective,
        x=x,
        duals_eq=y[:me],
        duals_ub=y[me:],
        iterations=iters,
    )
    _guard(free, sol, a_eq, b_eq, a_ub, b_ub)
    return sol


def _basic_values(A_ext: np.ndarray, basis: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact values of the basic variables: solve B v = b on original data."""
    B = A_ext[:, basis]
    try:
        return np.linalg.solve(B, b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(B, b, rcond=None)[0]


def _duals(A_ext: np.ndarray, flip: np.ndarray, basis: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """Simplex multipliers solving B'y = c_B, mapped to original row signs.

    Artificial basis entries are legitimate here: in phase 1 they carry unit
    cost (yielding the Farkas vector); in phase 2 they only mark dropped
    redundant rows and carry zero cost, forcing a zero multiplier.
    """
    B = A_ext[:, basis]
    try:
        y = np.linalg.solve(B.T, costs[basis])
    except np.linalg.LinAlgError:
        # Degenerate final basis: any least-squares multiplier works if it
        # reproduces the basic costs; the caller's gap guard rejects junk.
        y = np.linalg.lstsq(B.T, costs[basis], rcond=None)[0]
    y[flip] *= -1.0
    return y


def _guard(free, sol, a_eq, b_eq, a_ub, b_ub) -> None:
    """Reject grossly inconsistent primal/dual pairs (internal failure)."""
    x = sol.x
    scale = 1.0 + float(np.abs(x).max(initial=0.0))
    if a_eq.size and float(np.abs(a_eq @ x - b_eq).max(initial=0.0)) > 1e-6 * scale:
        raise SolverError("primal equality residual too large")
    if a_ub.size and float((a_ub @ x - b_ub).max(initial=0.0)) > 1e-6 * scale:
        raise SolverError("primal inequality residual too large")
    if float((-x[~free]).max(initial=0.0)) > 1e-6 * scale:
        raise SolverError("primal bound residual too large")
    dual_obj = float(b_eq @ sol.duals_eq) + float(b_ub @ sol.duals_ub)
    gap = abs(dual_obj - sol.objective) / (1.0 + abs(sol.objective))
    if gap > 1e-6:
        raise SolverError(f"duality gap {gap:.2e} too large")
