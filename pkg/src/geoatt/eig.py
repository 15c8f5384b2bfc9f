"""Eigenvalues of small dense real matrices.

Balance, reduce to upper Hessenberg form with Householder reflections, then
run the Francis double-shift QR iteration.  Meant for n up to a few dozen.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NoConvergence

__all__ = ["balance", "hessenberg", "hessenberg_eigvals", "spectrum"]

_EPS = np.finfo(float).eps


def balance(A: np.ndarray) -> np.ndarray:
    """Parlett-Reinsch balancing by powers of two (similarity, no rounding error)."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    radix = 2.0
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.sum(np.abs(A[:, i])) - abs(A[i, i])
            r = np.sum(np.abs(A[i, :])) - abs(A[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                A[i, :] /= f
                A[:, i] *= f
    return A


def hessenberg(A: np.ndarray) -> np.ndarray:
    """Upper Hessenberg form, orthogonally similar to ``A``."""
    H = np.array(A, dtype=float)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x
        v[0] -= alpha
        vn = np.linalg.norm(v)
        if vn == 0.0:
            continue
        v /= vn
        H[k + 1 :, k:] -= 2.0 * np.outer(v, v @ H[k + 1 :, k:])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v)
        H[k + 2 :, k] = 0.0
    return H


def hessenberg_eigvals(H: np.ndarray, max_iter: int | None = None) -> np.ndarray:
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.

    ``max_iter`` caps the total number of QR sweeps (default ``100 * n``).
    """
    a = np.array(H, dtype=float)
    n = a.shape[0]
    if max_iter is None:
        max_iter = 100 * max(n, 1)
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = 0.0
    for i in range(n):
        anorm += np.sum(np.abs(a[i, max(i - 1, 0) :]))
    total = 0
    nn = n - 1
    t = 0.0
    while nn >= 0:
        its = 0
        while True:
            # look for a small subdiagonal element
            l = 0
            for ll in range(nn, 0, -1):
                s = abs(a[ll - 1, ll - 1]) + abs(a[ll, ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll, ll - 1]) <= _EPS * s:
                    a[ll, ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if total >= max_iter:
                raise NoConvergence(f"QR iteration exceeded {max_iter} sweeps")
            if its in (10, 20):
                # exceptional shift
                t += x
                for i in range(nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                y = x = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            total += 1
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u <= _EPS * v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k, k - 1] = -a[k, k - 1]
                else:
                    a[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                # row transformation
                if k != nn - 1:
                    pv = a[k, k : nn + 1] + q * a[k + 1, k : nn + 1] + r * a[k + 2, k : nn + 1]
                    a[k + 2, k : nn + 1] -= pv * z
                else:
                    pv = a[k, k : nn + 1] + q * a[k + 1, k : nn + 1]
                a[k + 1, k : nn + 1] -= pv * y
                a[k, k : nn + 1] -= pv * x
                # column transformation
                mmin = min(nn, k + 3)
                if k != nn - 1:
                    pv = x * a[l : mmin + 1, k] + y * a[l : mmin + 1, k + 1] + z * a[l : mmin + 1, k + 2]
                    a[l : mmin + 1, k + 2] -= pv * r
                else:
                    pv = x * a[l : mmin + 1, k] + y * a[l : mmin + 1, k + 1]
                a[l : mmin + 1, k + 1] -= pv * q
                a[l : mmin + 1, k] -= pv
    return wr + 1j * wi


def _eigvec(M: np.ndarray, lam: complex, rng: np.random.Generator) -> np.ndarray:
    n = M.shape[0]
    scale = np.linalg.norm(M) + 1.0
    shift = lam + 1e-10 * scale
    A = M.astype(complex) - shift * np.eye(n)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(3):
        try:
            v = np.linalg.solve(A, v)
        except np.linalg.LinAlgError:
            A = A - 1e-8 * scale * np.eye(n)
            v = np.linalg.solve(A, v)
        v /= np.linalg.norm(v)
    return v


def spectrum(M, vectors: bool = False, max_iter: int | None = None):
    """Eigenvalues of a real square matrix, sorted by (real, imag).

    With ``vectors=True`` also return unit eigenvectors as columns, obtained
    by shifted inverse iteration on ``M``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    n = M.shape[0]
    if n == 0:
        lam = np.zeros(0, dtype=complex)
    elif n == 1:
        lam = np.array([complex(M[0, 0])])
    else:
        lam = hessenberg_eigvals(hessenberg(balance(M)), max_iter=max_iter)
    # complex pairs come out exactly conjugate; snap tiny imaginary parts
    lam = np.where(np.abs(lam.imag) == 0.0, lam.real + 0j, lam)
    lam = lam[np.lexsort((lam.imag, lam.real))]
    if not vectors:
        return lam
    rng = np.random.default_rng(0)
    V = np.column_stack([_eigvec(M, l, rng) for l in lam]) if n else np.zeros((0, 0), complex)
    return lam, V
