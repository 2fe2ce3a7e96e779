"""Eigenvalues of dense symmetric matrices.

Householder reduction to tridiagonal form followed by the implicit-shift QL
iteration.  Only eigenvalues are computed; no transformation matrix is
accumulated.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError

MAX_QL_SWEEPS = 50
_EPS = np.finfo(float).eps


def householder_tridiagonal(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduce symmetric ``a`` to tridiagonal form by Householder similarity transforms.

    Returns the diagonal and the sub-diagonal.  ``a`` is not modified.
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    off = np.zeros(max(n - 1, 0))
    for k in range(n - 2):
        x = a[k + 1 :, k]
        norm = math.sqrt(float(np.dot(x, x)))
        if norm == 0.0:
            continue
        alpha = -math.copysign(norm, x[0])
        v = x.copy()
        v[0] -= alpha
        v /= math.sqrt(float(np.dot(v, v)))
        block = a[k + 1 :, k + 1 :]
        w = block @ v
        q = 2.0 * (w - float(np.dot(v, w)) * v)
        block -= np.outer(v, q)
        block -= np.outer(q, v)
        off[k] = alpha
    if n >= 2:
        off[n - 2] = a[n - 1, n - 2]
    return np.diagonal(a).copy(), off


def tridiagonal_ql(diag, off) -> np.ndarray:
    """Eigenvalues of a symmetric tridiagonal matrix by implicit QL with Wilkinson shifts.

    Unsorted.  Raises :class:`ConvergenceError` when an eigenvalue needs more
    than ``MAX_QL_SWEEPS`` sweeps.
    """
    d = [float(v) for v in diag]
    n = len(d)
    e = [float(v) for v in off] + [0.0]
    # normwise floor so clusters of (near) zeros still deflate
    floor = _EPS * max((abs(x) for x in d + e), default=0.0)
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd or abs(e[m]) <= floor:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > MAX_QL_SWEEPS:
                raise ConvergenceError(f"QL iteration did not converge for eigenvalue {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.array(d)


def symmetric_eigvals(a: np.ndarray) -> np.ndarray:
    """All eigenvalues of symmetric ``a``, unsorted."""
    diag, off = householder_tridiagonal(a)
    return tridiagonal_ql(diag, off)
