"""Closed-form solutions of the closed loop.

On SO(n) the product ``H(t) = R(t) P`` obeys the matrix Riccati equation
``dH/dt = P - H^2`` and has the explicit solution

    H(t) = [sinh(Pt) + cosh(Pt) H0] [cosh(Pt) + sinh(Pt) H0]^{-1}.

On SO(3) with ``P = e1 e1^T`` the whole rotation is available in closed
form.  Partition

    R = [[r11, r12],
         [r21, R22]]

with ``S = [[0, -1], [1, 0]]``.  The first column follows from scalar
formulas, the two traces ``trace R22`` and ``trace R22 S`` from

    trace R22(t)   = (1 + r11(t)) tanh(phi(t)),
    trace R22 S(t) = g exp(t) sech(t + Atanh r11(0)) sech(phi(t)),
    phi(t)         = Atanh(trace R22(0) / (1 + r11(0))) + k log[(1 - r11(0)) / (1 - r11(t))],
    g              = trace R22(0) S cosh(Atanh r11(0)) cosh(phi(0)),

and the remaining two columns solve a 6x6 linear system.  The hyperbolic
arctangent is the principal complex branch, so ``phi`` may carry an
imaginary part of ``pi/2``; it cancels in every physical quantity.

Any other projection on SO(3) is brought to this form by an orthogonal
change of coordinates (rank 1 and rank 2), or reduces to the Riccati
solution with ``P = I`` (rank 0 and rank 3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RealityError, SingularSystem, SingularY
from .linalg import ProjectionPair, complex_atanh, hat, hyperbolic_Pt, negative_spectrum_distance, validate_rotation

S2 = np.array([[0.0, -1.0], [1.0, 0.0]])

__all__ = [
    "S2",
    "So3Blocks",
    "ExactSo3Params",
    "exact_H",
    "exact_r11",
    "exact_r21",
    "exact_params",
    "exact_traces",
    "reconstruct_R",
    "verify_block_relations",
    "align_projection",
    "So3ExactSolution",
]


@dataclass(frozen=True)
class So3Blocks:
    r11: float
    r12: np.ndarray
    r21: np.ndarray
    R22: np.ndarray

    @classmethod
    def of(cls, R) -> "So3Blocks":
        R = np.asarray(R, dtype=float)
        return cls(float(R[0, 0]), R[0, 1:].copy(), R[1:, 0].copy(), R[1:, 1:].copy())

    def assemble(self) -> np.ndarray:
        R = np.empty((3, 3))
        R[0, 0] = self.r11
        R[0, 1:] = self.r12
        R[1:, 0] = self.r21
        R[1:, 1:] = self.R22
        return R

    @property
    def trace(self) -> float:
        return float(np.trace(self.R22))

    @property
    def trace_S(self) -> float:
        return float(np.trace(self.R22 @ S2))


def exact_H(t: float, proj: ProjectionPair, H0) -> np.ndarray:
    """``R(t) P`` from ``H0 = R(0) P`` in closed form.

    Raises :class:`SingularY` when the denominator is singular, which can
    only happen for negative ``t``.
    """
    H0 = np.asarray(H0, dtype=float)
    P, Q = proj.P, proj.Q
    if np.linalg.norm(H0 @ Q) <= 1e-12 * max(1.0, np.linalg.norm(H0)):
        # H0 = H0 P: multiply both factors on the right by Q + 2 e^{-t} P and
        # expand cosh, sinh in e^{+-t}; no entry grows and nothing cancels
        H0 = H0 @ P
        e = np.exp(-t)
        eps = e * e
        PH = P @ H0
        X = 2.0 * e * (Q @ H0) + P + PH - eps * (P - PH)
        Y = np.eye(len(P)) + PH + eps * (P - PH)
        # directions scaled by eps are legitimately that small
        floor = min(1.0, eps)
    else:
        C, S = hyperbolic_Pt(proj, t)
        X = S + C @ H0
        Y = C + S @ H0
        floor = 1.0
    sv = np.linalg.svd(Y, compute_uv=False)
    if not sv[-1] > 1e-14 * sv[0] * floor:
        raise SingularY(f"cosh(Pt) + sinh(Pt) H0 is singular at t = {t}")
    return np.linalg.solve(Y.T, X.T).T


def _check_r11(r11_0: float) -> float:
    r11_0 = float(r11_0)
    if not r11_0 > -1.0:
        raise DomainError(f"r11(0) = {r11_0} <= -1: initial condition has -1 in its spectrum")
    if r11_0 > 1.0 + 1e-12:
        raise DomainError(f"r11(0) = {r11_0} > 1 is not an entry of a rotation")
    return min(r11_0, 1.0)


def _q(r11_0):
    # q = exp(-2 Atanh r11_0), finite also at r11_0 = 1
    return (1.0 - r11_0) / (1.0 + r11_0)


def exact_r11(t, r11_0: float):
    """``tanh(t + Atanh r11(0))``; constant 1 when ``r11(0) = 1``."""
    r11_0 = _check_r11(r11_0)
    c = complex_atanh(r11_0)
    return np.tanh(np.asarray(t, dtype=float) + np.real(c))


def exact_r21(t, r21_0, r11_0: float):
    """``sech(t) / (1 + tanh(t) r11(0)) * r21(0)``, broadcast over ``t``."""
    r11_0 = _check_r11(r11_0)
    r21_0 = np.asarray(r21_0, dtype=float)
    if r11_0**2 + r21_0 @ r21_0 > 1.0 + 1e-9:
        raise DomainError("(r11(0), r21(0)) is longer than a unit vector; not the first column of a rotation")
    t = np.asarray(t, dtype=float)
    scale = 1.0 / (np.cosh(t) + np.sinh(t) * r11_0)
    return scale[..., None] * r21_0


@dataclass(frozen=True)
class ExactSo3Params:
    """Initial data of the SO(3) closed form (coordinates with ``P = e1 e1^T``).

    ``phi0`` is the principal ``Atanh(trace R22(0) / (1 + r11(0)))``.
    """

    r11_0: float
    r21_0: np.ndarray
    tr0: float
    trS0: float
    k: float
    phi0: complex

    @property
    def f(self) -> complex:
        """``phi0 + k log(1 - r11(0))`` (``-inf`` when ``r11(0) = 1``)."""
        with np.errstate(divide="ignore"):
            return self.phi0 + self.k * np.log(1.0 - self.r11_0)

    @property
    def g(self) -> complex:
        """Amplitude of ``trace R22 S``; infinite when ``r11(0) = 1``."""
        c = complex_atanh(self.r11_0)
        with np.errstate(over="ignore"):
            return self.trS0 * np.cosh(np.real(c)) * np.cosh(self.phi0)


def exact_params(R0, k: float, tol: float = 1e-9) -> ExactSo3Params:
    """Closed-form constants for ``R0`` in aligned coordinates (``P = e1 e1^T``)."""
    R0 = validate_rotation(R0)
    if R0.shape != (3, 3):
        raise ValueError("the full closed form exists on SO(3) only")
    if negative_spectrum_distance(R0) <= tol:
        raise DomainError("R0 has -1 in its spectrum; the closed form does not apply")
    b = So3Blocks.of(R0)
    r11_0 = _check_r11(b.r11)
    if r11_0 == 1.0 and np.linalg.norm(b.r21) > 1e-9:
        raise DomainError("r11(0) = 1 with r21(0) != 0 is not a rotation")
    ratio = b.trace / (1.0 + r11_0)
    phi0 = complex_atanh(ratio)
    if isinstance(phi0, float):
        # ratio = +-1 exactly; keep a large finite value instead of an infinity
        phi0 = complex(np.copysign(40.0, phi0))
    return ExactSo3Params(r11_0, b.r21, b.trace, b.trace_S, float(k), complex(phi0))


def _cosh_ratio(a, b):
    """``cosh(a) / cosh(b)`` for complex arguments without overflow."""
    sa = np.where(np.real(a) < 0, -1.0, 1.0)
    sb = np.where(np.real(b) < 0, -1.0, 1.0)
    a = sa * a
    b = sb * b
    return np.exp(a - b) * (1 + np.exp(-2 * a)) / (1 + np.exp(-2 * b))


def _real(z, what: str, tol: float = 1e-6):
    z = np.asarray(z)
    scale = np.maximum(1.0, np.abs(z))
    bad = np.abs(np.imag(z)) > tol * scale
    if np.any(bad):
        raise RealityError(f"{what} has imaginary residue {np.max(np.abs(np.imag(z))):.3e}")
    return np.real(z)


def exact_traces(t, params: ExactSo3Params):
    """``(trace R22(t), trace R22(t) S)``, broadcast over ``t``."""
    t = np.asarray(t, dtype=float)
    a0, k = params.r11_0, params.k
    q = _q(a0)
    e2t = np.exp(-2.0 * t)
    a = exact_r11(t, a0)
    # k log[(1 - a0) / (1 - a(t))] = k log[(e^{2t} + q) / (1 + q)]
    drift = k * (2.0 * t + np.log((1.0 + q * e2t) / (1.0 + q)))
    phi = params.phi0 + drift
    tr = (1.0 + a) * np.tanh(phi)
    # exp(t) sech(t + c) cosh(c) = (1 + q) / (1 + q e^{-2t}),  c = Atanh a0
    growth = (1.0 + q) / (1.0 + q * e2t)
    trS = params.trS0 * growth * _cosh_ratio(params.phi0, phi)
    return _real(tr, "trace R22"), _real(trS, "trace R22 S")


_E2 = np.array([0.0, 1.0, 0.0])
_E3 = np.array([0.0, 0.0, 1.0])
_B22_INV = np.eye(3) - 0.5 * (np.outer(_E3, _E3) + np.outer(_E2, _E2))


def _system(r):
    """The 6x6 matrix whose rows encode orthogonality, the cross product and the two traces."""
    shape = r.shape[:-1]
    A = np.zeros(shape + (6, 6))
    A[..., 0, :3] = r
    A[..., 1:4, :3] = hat(r)
    A[..., 1:4, 3:] = -np.eye(3)
    A[..., 4, 1] = 1.0
    A[..., 4, 5] = 1.0
    A[..., 5, 2] = -1.0
    A[..., 5, 4] = 1.0
    return A


def reconstruct_R(t, params: ExactSo3Params, firstcol=None) -> np.ndarray:
    """Rotation at time ``t`` (aligned coordinates), broadcast over ``t``.

    Columns two and three come from the normal equations of the 6x6 system,
    solved through the Schur complement of its lower-right block.
    """
    t = np.asarray(t, dtype=float)
    if firstcol is None:
        r = np.concatenate(
            [exact_r11(t, params.r11_0)[..., None], exact_r21(t, params.r21_0, params.r11_0)], axis=-1
        )
    else:
        r = np.asarray(firstcol, dtype=float)
    tr, trS = exact_traces(t, params)
    A = _system(r)
    rhs = np.zeros(r.shape[:-1] + (6,))
    rhs[..., 4] = tr
    rhs[..., 5] = trS
    AT = np.swapaxes(A, -1, -2)
    B = AT @ A
    c = (AT @ rhs[..., None])[..., 0]
    B11, B12, B21 = B[..., :3, :3], B[..., :3, 3:], B[..., 3:, :3]
    C = B11 - B12 @ _B22_INV @ B21
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("Schur complement is not positive definite") from exc
    y = c[..., :3] - (B12 @ (_B22_INV @ c[..., 3:, None]))[..., 0]
    x1 = np.linalg.solve(np.swapaxes(L, -1, -2), np.linalg.solve(L, y[..., None]))[..., 0]
    x2 = (_B22_INV @ (c[..., 3:, None] - B21 @ x1[..., None]))[..., 0]
    return np.stack([r, x1, x2], axis=-1)


def verify_block_relations(R):
    """Residuals of the three SO(3) block identities.

    Returns ``(||r21 r12 - (r11 R22 + S R22 S)||_F,
    |(trace R22)^2 + (trace R22 S)^2 - (1 + r11)^2|,
    ||R22 (R22^T - R22) - trace(R22 S) R22 S||_F)``.
    """
    b = So3Blocks.of(R)
    R22 = b.R22
    e1 = np.linalg.norm(np.outer(b.r21, b.r12) - (b.r11 * R22 + S2 @ R22 @ S2))
    e2 = abs(b.trace**2 + b.trace_S**2 - (1 + b.r11) ** 2)
    e3 = np.linalg.norm(R22 @ (R22.T - R22) - b.trace_S * R22 @ S2)
    return float(e1), float(e2), float(e3)


def align_projection(proj: ProjectionPair):
    """Orthogonal ``O`` and a mode such that ``O^T P O`` is in standard form.

    Modes: ``"rank1"`` (``O^T P O = e1 e1^T``), ``"rank2"``
    (``O^T Q O = e1 e1^T``), ``"identity"`` (P = I), ``"zero"`` (P = 0).
    ``O`` is a Householder reflection (or the identity), so ``O = O^T``.
    """
    n, p = proj.n, proj.rank
    if n != 3:
        raise ValueError("alignment is only needed on SO(3)")
    if p == 3:
        return np.eye(3), "identity"
    if p == 0:
        return np.eye(3), "zero"
    M = proj.P if p == 1 else proj.Q
    col = int(np.argmax(np.linalg.norm(M, axis=0)))
    e = M[:, col] / np.linalg.norm(M[:, col])
    w = np.array([1.0, 0.0, 0.0]) - e
    if np.linalg.norm(w) < 1e-14:
        O = np.eye(3)
    else:
        O = np.eye(3) - 2.0 * np.outer(w, w) / (w @ w)
    return O, ("rank1" if p == 1 else "rank2")


class So3ExactSolution:
    """Closed-form ``R(t)`` on SO(3) for any projection.

    Call with a scalar or an array of times; returns ``(..., 3, 3)``.
    """

    def __init__(self, R0, proj: ProjectionPair, tol: float = 1e-9):
        R0 = validate_rotation(R0)
        if proj.n != 3:
            raise ValueError("So3ExactSolution needs n = 3")
        self.R0 = R0
        self.proj = proj
        self.O, self.mode = align_projection(proj)
        self.R0_aligned = self.O.T @ R0 @ self.O
        self.params = None
        if self.mode == "rank1":
            self.params = exact_params(self.R0_aligned, proj.k, tol)

    def _riccati(self, t, P, H0, scale=1.0):
        Pp = ProjectionPair(P, 1.0)
        return np.stack([exact_H(scale * ti, Pp, H0) for ti in np.atleast_1d(t)])

    def __call__(self, t) -> np.ndarray:
        t_arr = np.asarray(t, dtype=float)
        ts = np.atleast_1d(t_arr)
        if np.array_equal(self.R0, np.eye(3)):
            # the solution from the target stays there, without rounding noise
            Ra = np.broadcast_to(np.eye(3), ts.shape + (3, 3)).copy()
        elif self.mode == "rank1":
            Ra = reconstruct_R(ts, self.params)
        elif self.mode == "identity":
            Ra = self._riccati(ts, np.eye(3), self.R0_aligned)
        elif self.mode == "zero":
            # with P = 0: dR/dt = k (I - R^2), the P = I flow run k times faster
            Ra = self._riccati(ts, np.eye(3), self.R0_aligned, self.proj.k)
        else:
            Pa = np.diag([0.0, 1.0, 1.0])
            H = self._riccati(ts, Pa, self.R0_aligned @ Pa)
            c2, c3 = H[..., :, 1], H[..., :, 2]
            Ra = np.stack([np.cross(c2, c3), c2, c3], axis=-1)
        R = self.O @ Ra @ self.O.T
        return R[0] if t_arr.ndim == 0 else R
