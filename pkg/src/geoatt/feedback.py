"""The projection-gain feedback law on SO(n) and its closed loop.

For a rotation ``R``, projection ``P`` (with ``Q = I - P``) and gain ``k``

    U = P R^T - R P + k R Q (R^T - R) Q R^T,
    dR/dt = U R = P - R P R + k R Q (R^T - R) Q.

With ``P = e1 e1^T`` the first column ``r = R e1`` obeys
``dr/dt = e1 - <e1, r> r`` and travels to ``e1`` along a great circle.
Everything here broadcasts over leading axes of ``R``.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch
from .linalg import ProjectionPair

__all__ = [
    "control_U",
    "closed_loop_rhs",
    "reduced_rhs",
    "control_effort",
    "lyapunov",
]


def _T(A):
    # contiguous copy: batched matmul on transposed views is several times slower
    return np.ascontiguousarray(np.swapaxes(A, -1, -2))


def _check(R, proj: ProjectionPair) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (proj.n, proj.n):
        raise DimensionMismatch(f"R has shape {R.shape[-2:]}, projection is {proj.n}x{proj.n}")
    return R


def _control_U(R, P, Q, k):
    # with H = R P and N = R Q = R - H:
    # U = H^T - H + k N [Q (R^T - R) Q] N^T
    H = R @ P
    N = R - H
    A = Q @ (_T(R) - R) @ Q
    U = _T(H) - H + k * (N @ A @ _T(N))
    return 0.5 * (U - _T(U))


def _closed_loop(R, P, Q, k):
    return P - R @ P @ R + k * (R @ Q @ (_T(R) - R) @ Q)


def control_U(R, proj: ProjectionPair) -> np.ndarray:
    """Feedback ``U(R)`` in so(n), explicitly skew-symmetrised."""
    R = _check(R, proj)
    return _control_U(R, proj.P, proj.Q, proj.k)


def closed_loop_rhs(R, proj: ProjectionPair) -> np.ndarray:
    """``dR/dt`` of the closed loop, assembled without forming ``U``."""
    R = _check(R, proj)
    return _closed_loop(R, proj.P, proj.Q, proj.k)


def reduced_rhs(r, u) -> np.ndarray:
    """Velocity ``u - <u, r> r`` of a point ``r`` on the sphere under control ``u``."""
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    if r.shape[-1] != u.shape[-1]:
        raise DimensionMismatch(f"r has length {r.shape[-1]}, u has length {u.shape[-1]}")
    return u - np.sum(u * r, axis=-1, keepdims=True) * r


def lyapunov(R) -> np.ndarray:
    """``V(R) = trace(I - R)``; zero only at the identity."""
    R = np.asarray(R, dtype=float)
    return R.shape[-1] - np.trace(R, axis1=-2, axis2=-1)


def _effort(R, P, Q, k):
    U = _control_U(R, P, Q, k)
    normU_sq = np.sum(U * U, axis=(-2, -1))
    QRQ = Q @ R @ Q
    Vdot = (
        -np.sum(P * P)
        + np.sum(P * (R @ R), axis=(-2, -1))
        - k * np.sum(QRQ * QRQ, axis=(-2, -1))
        + k * np.sum(_T(QRQ) * QRQ, axis=(-2, -1))
    )
    return normU_sq, Vdot


def control_effort(R, proj: ProjectionPair):
    """``(||U||_F^2, dV/dt)`` at ``R``.

    ``dV/dt = -||P||^2 + <P, R^2> - k ||QRQ||^2 + k <Q R^T Q, QRQ>`` is
    evaluated from this trace expansion, independently of ``U``.  The two
    agree as ``||U||_F^2 == -2 dV/dt`` only for ``P = I``; in general neither
    bounds the other (``P = e1 e1^T`` with a rotation about ``e3`` gives
    ``||U||_F^2 == -dV/dt``).
    """
    R = _check(R, proj)
    normU_sq, Vdot = _effort(R, proj.P, proj.Q, proj.k)
    if np.ndim(normU_sq) == 0:
        return float(normU_sq), float(Vdot)
    return normU_sq, Vdot
