# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simplex pivot loop.

Pivot-for-pivot identical to the NumPy fallback in ``_pivot_py``: same
entering rule (Dantzig with lowest-index ties, Bland after the degenerate
budget), same minimum-ratio leaving rule with smallest-basic-index ties,
and the same elementwise update arithmetic.
"""

OPTIMAL = 0
UNBOUNDED = 1
ITER_LIMIT = 2

cdef double DEGEN_EPS = 1e-12


def simplex_loop(
    double[:, ::1] T,
    long long[::1] basis,
    int n_enterable,
    long long bland_threshold,
    double pivot_tol,
    long long max_iter,
    long long degen_start=0,
):
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t ncols = T.shape[1] - 1
    cdef Py_ssize_t i, j, k, r
    cdef long long it, degen = degen_start
    cdef double best, ratio, theta, piv, f
    cdef bint found

    for it in range(max_iter):
        # entering column
        j = -1
        if degen > bland_threshold:
            for k in range(n_enterable):
                if T[m, k] < -pivot_tol:
                    j = k
                    break
            if j < 0:
                return OPTIMAL, -1, it, degen
        else:
            best = T[m, 0]
            j = 0
            for k in range(1, n_enterable):
                if T[m, k] < best:
                    best = T[m, k]
                    j = k
            if best >= -pivot_tol:
                return OPTIMAL, -1, it, degen

        # leaving row: min ratio, ties by smallest basic index
        found = False
        theta = 0.0
        for i in range(m):
            if T[i, j] > pivot_tol:
                ratio = T[i, ncols] / T[i, j]
                if not found or ratio < theta:
                    theta = ratio
                    found = True
        if not found:
            return UNBOUNDED, j, it, degen
        r = -1
        for i in range(m):
            if T[i, j] > pivot_tol:
                ratio = T[i, ncols] / T[i, j]
                if ratio == theta and (r < 0 or basis[i] < basis[r]):
                    r = i
        if theta <= DEGEN_EPS:
            degen += 1

        piv = T[r, j]
        for k in range(ncols + 1):
            T[r, k] /= piv
        for i in range(m + 1):
            if i == r:
                continue
            f = T[i, j]
            if f != 0.0:
                for k in range(ncols + 1):
                    T[i, k] -= f * T[r, k]
        basis[r] = j
    return ITER_LIMIT, -1, max_iter, degen
