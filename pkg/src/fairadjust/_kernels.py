"""Hot numeric kernels with numba and pure-numpy twins.

Two inner loops dominate runtime: simplex pivoting (thousands of solves
in the factorial experiment and epsilon sweeps) and per-row categorical
sampling (one draw per dataset row). Each has a numba @njit version and
a vectorized numpy fallback implementing the same arithmetic, step for
step, so the two backends produce bit-identical results.

Set FAIRADJUST_BACKEND=numpy or FAIRADJUST_BACKEND=numba to force one;
the default is numba when importable, numpy otherwise. Run
benchmarks/bench_backends.py to compare.
"""

from __future__ import annotations

import os

import numpy as np

_STATUS_OPTIMAL = 0
_STATUS_UNBOUNDED = 1
_STATUS_ITERLIMIT = 2

_DEGEN_EPS = 1e-12


try:
    import numba

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def _pick_backend() -> str:
    choice = os.environ.get("FAIRADJUST_BACKEND", "auto").strip().lower()
    if choice not in ("auto", "", "numba", "numpy"):
        raise ValueError(f"FAIRADJUST_BACKEND must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numpy":
        return "numpy"
    if not HAS_NUMBA:
        if choice == "numba":
            raise ImportError("FAIRADJUST_BACKEND=numba but numba is not installed")
        return "numpy"
    return "numba"


BACKEND = _pick_backend()


def simplex_iterate_numpy(T, basis, n_enterable, tol, piv_tol, max_iter, bland_after):
    """Pivot the tableau in place until optimal.

    T is (m+1, ncols+1): constraint rows with rhs in the last column,
    reduced costs in the last row. basis holds the basic column of each
    row. Entering rule is Dantzig (most negative reduced cost, lowest
    index on ties), switching to Bland's rule after `bland_after`
    consecutive degenerate pivots to break cycling; leaving rule is the
    minimum ratio with lowest row index (Bland: lowest basic variable).
    Returns (status, iterations).
    """
    m = T.shape[0] - 1
    last = T.shape[1] - 1
    degen = 0
    it = 0
    while it < max_iter:
        obj = T[m, :n_enterable]
        if degen >= bland_after:
            neg = np.flatnonzero(obj < -tol)
            if neg.size == 0:
                return _STATUS_OPTIMAL, it
            j = int(neg[0])
        else:
            j = int(np.argmin(obj))
            if obj[j] >= -tol:
                return _STATUS_OPTIMAL, it
        col = T[:m, j]
        mask = col > piv_tol
        if not mask.any():
            return _STATUS_UNBOUNDED, it
        ratios = np.full(m, np.inf)
        ratios[mask] = T[:m, last][mask] / col[mask]
        rmin = ratios.min()
        if degen >= bland_after:
            ties = np.flatnonzero(ratios == rmin)
            r = int(ties[np.argmin(basis[ties])])
        else:
            # among near-minimal ratios take the largest pivot element;
            # pivoting on tiny entries wrecks the tableau numerically
            window = rmin + 1e-9 * abs(rmin) + 1e-12
            cand = np.flatnonzero(ratios <= window)
            r = int(cand[np.argmax(col[cand])])
        if ratios[r] < _DEGEN_EPS:
            degen += 1
        else:
            degen = 0
        piv = T[r, j]
        T[r, :] /= piv
        colv = T[:, j].copy()
        colv[r] = 0.0
        T -= np.outer(colv, T[r, :])
        T[:, j] = 0.0
        T[r, j] = 1.0
        basis[r] = j
        it += 1
    return _STATUS_ITERLIMIT, it


def sample_rows_numpy(cdf, yhat, a, u):
    """Inverse-CDF draw per row: smallest i with u < cdf[a, i, yhat].

    cdf is the (G, C, C) running column sum of the policy tensor.
    """
    c = cdf.shape[1]
    cols = cdf[a, :, yhat]                       # (N, C)
    counts = (u[:, None] >= cols).sum(axis=1)
    return np.minimum(counts, c - 1).astype(np.int64)


if HAS_NUMBA:
    from numba import njit

    @njit(cache=True)
    def simplex_iterate_numba(T, basis, n_enterable, tol, piv_tol, max_iter, bland_after):
        m = T.shape[0] - 1
        last = T.shape[1] - 1
        degen = 0
        it = 0
        while it < max_iter:
            j = -1
            if degen >= bland_after:
                for jj in range(n_enterable):
                    if T[m, jj] < -tol:
                        j = jj
                        break
                if j == -1:
                    return _STATUS_OPTIMAL, it
            else:
                j = 0
                best = T[m, 0]
                for jj in range(1, n_enterable):
                    if T[m, jj] < best:
                        best = T[m, jj]
                        j = jj
                if best >= -tol:
                    return _STATUS_OPTIMAL, it
            rmin = np.inf
            any_pos = False
            for i in range(m):
                if T[i, j] > piv_tol:
                    any_pos = True
                    ratio = T[i, last] / T[i, j]
                    if ratio < rmin:
                        rmin = ratio
            if not any_pos:
                return _STATUS_UNBOUNDED, it
            r = -1
            if degen >= bland_after:
                bbest = np.int64(2 ** 62)
                for i in range(m):
                    if T[i, j] > piv_tol:
                        ratio = T[i, last] / T[i, j]
                        if ratio == rmin and basis[i] < bbest:
                            bbest = basis[i]
                            r = i
            else:
                window = rmin + 1e-9 * abs(rmin) + 1e-12
                best_piv = -1.0
                for i in range(m):
                    if T[i, j] > piv_tol:
                        ratio = T[i, last] / T[i, j]
                        if ratio <= window and T[i, j] > best_piv:
                            best_piv = T[i, j]
                            r = i
            ratio_r = T[r, last] / T[r, j]
            if ratio_r < _DEGEN_EPS:
                degen += 1
            else:
                degen = 0
            piv = T[r, j]
            for k in range(last + 1):
                T[r, k] /= piv
            for i in range(m + 1):
                if i != r:
                    f = T[i, j]
                    if f != 0.0:
                        for k in range(last + 1):
                            T[i, k] -= f * T[r, k]
            for i in range(m + 1):
                T[i, j] = 0.0
            T[r, j] = 1.0
            basis[r] = j
            it += 1
        return _STATUS_ITERLIMIT, it

    @njit(cache=True)
    def sample_rows_numba(cdf, yhat, a, u):
        n = yhat.shape[0]
        c = cdf.shape[1]
        out = np.empty(n, dtype=np.int64)
        for r in range(n):
            ai = a[r]
            k = yhat[r]
            ur = u[r]
            i = 0
            while i < c - 1 and ur >= cdf[ai, i, k]:
                i += 1
            out[r] = i
        return out

if BACKEND == "numba":
    simplex_iterate = simplex_iterate_numba
    sample_rows = sample_rows_numba
else:
    simplex_iterate = simplex_iterate_numpy
    sample_rows = sample_rows_numpy
