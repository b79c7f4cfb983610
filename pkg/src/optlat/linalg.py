"""Dense Hermitian eigensolver: Householder tridiagonalization + implicit QL.

The band solver calls :func:`eigh`, which dispatches either to this native
implementation or to LAPACK through numpy. The native path is exact in
structure but runs Python-level loops, so LAPACK is the default for the
large plane-wave Hamiltonians; the two are cross-checked in the test suite.
"""
from __future__ import annotations

import math

import numpy as np


class EigenConvergenceError(RuntimeError):
    def __init__(self, index: int, iterations: int, residual: float):
        super().__init__(f"QL failed to converge for eigenvalue {index} after {iterations} "
                         f"iterations (off-diagonal residual {residual:.3e})")
        self.index, self.iterations, self.residual = index, iterations, residual


def tridiagonalize(a: np.ndarray):
    """Return (d, e, Q) with a = Q T Q^H, T real symmetric tridiagonal (diag d, off-diag e >= 0)."""
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        x = a[k + 1:, k]
        nx = np.linalg.norm(x)
        if nx == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * nx
        v /= np.linalg.norm(v)
        # a <- H a H with H = I - 2 v v^H acting on rows/cols k+1:
        sub = a[k + 1:, :]
        sub -= 2.0 * np.outer(v, v.conj() @ sub)
        sub = a[:, k + 1:]
        sub -= 2.0 * np.outer(sub @ v, v.conj())
        qs = q[:, k + 1:]
        qs -= 2.0 * np.outer(qs @ v, v.conj())
    d = a.diagonal().real.copy()
    t = a.diagonal(-1).copy()
    e = np.abs(t)
    # diagonal unitary making the off-diagonal real and non-negative
    s = np.ones(n, dtype=complex)
    for k in range(n - 1):
        ph = t[k] / e[k] if e[k] > 0 else 1.0
        s[k + 1] = s[k] * ph
    return d, e, q * s[None, :]


def tql_implicit(d, e, z=None, max_iter: int = 50):
    """Implicit QL with Wilkinson-style shifts on a real symmetric tridiagonal matrix.

    ``z`` (n x n) accumulates the rotations; pass the tridiagonalizing unitary
    to obtain eigenvectors of the original matrix. Returns (w, z) unsorted.
    """
    d = np.array(d, float)
    n = d.size
    e = np.append(np.array(e, float), 0.0)
    zt = None if z is None else np.array(z).T.copy()  # rows are eigenvector columns
    eps = np.finfo(float).eps
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                if abs(e[m]) <= eps * (abs(d[m]) + abs(d[m + 1])):
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                raise EigenConvergenceError(l, it, abs(e[l]))
            it += 1
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
                s, c = f / r, g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if zt is not None:
                    zi1 = zt[i + 1].copy()
                    zt[i + 1] = s * zt[i] + c * zi1
                    zt[i] = c * zt[i] - s * zi1
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, (None if zt is None else zt.T)


def eigh_native(a: np.ndarray):
    d, e, q = tridiagonalize(a)
    w, v = tql_implicit(d, e, q)
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigh(a: np.ndarray, backend: str = "lapack"):
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix."""
    if backend == "native":
        return eigh_native(a)
    if backend == "lapack":
        return np.linalg.eigh(a)
    raise ValueError(f"unknown eigensolver backend {backend!r}")
