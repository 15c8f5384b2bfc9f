"""Small dense linear algebra on SO(n) and so(n).

Rotations, skew matrices and projections are plain ``numpy`` arrays; the
functions here validate, build and transform them.  Most array routines
accept a stack ``(..., n, n)`` so the integrators can advance many
trajectories at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NegativeDeterminant, NotOrthogonal

ORTHO_TOL = 1e-9
PROJ_TOL = 1e-12

__all__ = [
    "ProjectionPair",
    "validate_rotation",
    "orthogonality_residual",
    "hat",
    "vee",
    "skew_part",
    "exp_skew",
    "expm",
    "hyperbolic_Pt",
    "complex_atanh",
    "in_negative_spectrum_set",
    "negative_spectrum_distance",
    "haar_sample",
    "random_projection",
    "check_prp_lemma",
]


@dataclass(frozen=True)
class ProjectionPair:
    """Gain projection ``P`` (symmetric, idempotent) and scalar gain ``k``.

    The complement ``Q = I - P`` is derived.  The stored array is a read-only
    copy, so instances can be shared freely.
    """

    P: np.ndarray
    k: float = 1.0
    Q: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise DimensionMismatch(f"P must be square, got shape {P.shape}")
        if not np.all(np.isfinite(P)):
            raise ValueError("P has non-finite entries")
        if np.linalg.norm(P - P.T) > PROJ_TOL:
            raise ValueError("P is not symmetric")
        if np.linalg.norm(P @ P - P) > PROJ_TOL:
            raise ValueError("P is not idempotent")
        if not (np.isfinite(self.k) and self.k > 0):
            raise ValueError(f"gain k must be positive, got {self.k}")
        Q = np.eye(P.shape[0]) - P
        P.flags.writeable = False
        Q.flags.writeable = False
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "k", float(self.k))

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.P)))

    @classmethod
    def from_diagonal(cls, mask, k: float = 1.0) -> "ProjectionPair":
        """``P = diag(mask)`` for a 0/1 mask."""
        mask = np.asarray(mask, dtype=float)
        if not np.all((mask == 0) | (mask == 1)):
            raise ValueError("diagonal mask entries must be 0 or 1")
        return cls(np.diag(mask), k)

    @classmethod
    def from_basis(cls, vectors, n: int | None = None, k: float = 1.0) -> "ProjectionPair":
        """Orthogonal projection onto the span of the given vectors (rows)."""
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        if V.size == 0:
            if n is None:
                raise ValueError("n is required for the zero projection")
            return cls(np.zeros((n, n)), k)
        Qf, _ = np.linalg.qr(V.T)
        P = Qf @ Qf.T
        return cls((P + P.T) / 2, k)


def orthogonality_residual(R: np.ndarray) -> np.ndarray:
    """``||R^T R - I||_F`` (batched over leading axes)."""
    R = np.asarray(R, dtype=float)
    n = R.shape[-1]
    E = np.swapaxes(R, -1, -2) @ R - np.eye(n)
    return np.sqrt(np.sum(E * E, axis=(-2, -1)))


def validate_rotation(M, tol: float = ORTHO_TOL) -> np.ndarray:
    """Return ``M`` as a float array if it lies on SO(n) within ``tol``.

    Raises
    ------
    NotOrthogonal
        If ``M`` is not square, not finite, or ``||M^T M - I||_F > tol``.
    NegativeDeterminant
        If ``M`` is orthogonal but ``det M < 0``.
    """
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 2:
        raise NotOrthogonal(f"expected an n x n matrix with n >= 2, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NotOrthogonal("matrix has non-finite entries")
    res = float(orthogonality_residual(M))
    if res > tol:
        raise NotOrthogonal(f"||R^T R - I||_F = {res:.3e} exceeds {tol:.1e}")
    if np.linalg.det(M) < 0:
        raise NegativeDeterminant("det(R) = -1; matrix is a reflection")
    return M


def hat(w) -> np.ndarray:
    """Cross-product matrix: ``hat(w) @ y == np.cross(w, y)``."""
    w = np.asarray(w, dtype=float)
    O = np.zeros(w.shape[:-1] + (3, 3))
    O[..., 0, 1] = -w[..., 2]
    O[..., 0, 2] = w[..., 1]
    O[..., 1, 0] = w[..., 2]
    O[..., 1, 2] = -w[..., 0]
    O[..., 2, 0] = -w[..., 1]
    O[..., 2, 1] = w[..., 0]
    return O


def vee(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    return np.stack([S[..., 2, 1], S[..., 0, 2], S[..., 1, 0]], axis=-1)


def skew_part(A) -> np.ndarray:
    return 0.5 * (A - np.swapaxes(A, -1, -2))


def _rodrigues(S: np.ndarray) -> np.ndarray:
    w = vee(S)
    th2 = np.sum(w * w, axis=-1)
    th = np.sqrt(th2)
    small = th < 1e-4
    safe = np.where(small, 1.0, th)
    a = np.where(small, 1 - th2 / 6 + th2 * th2 / 120, np.sin(safe) / safe)
    b = np.where(small, 0.5 - th2 / 24 + th2 * th2 / 720, (1 - np.cos(safe)) / (safe * safe))
    S2 = S @ S
    return np.eye(3) + a[..., None, None] * S + b[..., None, None] * S2


def _planar(S: np.ndarray) -> np.ndarray:
    th = S[..., 1, 0]
    c, s = np.cos(th), np.sin(th)
    out = np.empty(S.shape)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


# Pade(13) coefficients and scaling threshold, Higham (2005).
_B13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
_THETA13 = 5.371920351148152
# lower degrees suffice below these 1-norms (same table)
_PADE_LOW = (
    (1.495585217958292e-2, (120.0, 60.0, 12.0, 1.0)),
    (2.539398330063230e-1, (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0)),
    (9.504178996162932e-1, (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0)),
    (
        2.097847961257068e0,
        (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    ),
)


def _pade_low(A, b):
    I = np.broadcast_to(np.eye(A.shape[-1]), A.shape)
    A2 = A @ A
    P = I
    U = b[1] * I
    V = b[0] * I
    for j in range(2, len(b), 2):
        P = P @ A2
        V = V + b[j] * P
        U = U + b[j + 1] * P
    U = A @ U
    return np.linalg.solve(V - U, V + U)


def expm(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring with Pade approximants.

    The degree (3, 5, 7, 9 or 13) is picked from the 1-norm.

    Works on a stack ``(..., n, n)``; one scaling exponent is used for the
    whole stack (the largest one needed).
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if A.size == 0:
        return A.copy()
    norm1 = float(np.max(np.sum(np.abs(A), axis=-2)))
    if norm1 == 0.0:
        return np.broadcast_to(np.eye(n), A.shape).copy()
    for theta, b in _PADE_LOW:
        if norm1 <= theta:
            return _pade_low(A, b)
    s = 0
    if norm1 > _THETA13:
        s = int(np.ceil(np.log2(norm1 / _THETA13)))
    A = A / (2.0**s)
    b = _B13
    I = np.broadcast_to(np.eye(n), A.shape)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I
    X = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        X = X @ X
    return X


def exp_skew(S) -> np.ndarray:
    """Exponential of a skew matrix (or stack of them), a rotation.

    Closed forms are used for n = 2 and n = 3 (Rodrigues); larger n go
    through :func:`expm`.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[-1]
    if n == 3:
        return _rodrigues(S)
    if n == 2:
        return _planar(S)
    return expm(S)


def hyperbolic_Pt(proj: ProjectionPair, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``(cosh(P t), sinh(P t))`` via ``Q + cosh(t) P`` and ``sinh(t) P``."""
    P, Q = proj.P, proj.Q
    return Q + np.cosh(t) * P, np.sinh(t) * P


def _principal_log(w):
    w = np.asarray(w, dtype=complex)
    # -0.0 + 0.0 == +0.0: puts the negative real axis on arg = +pi
    w = w.real + 1j * (w.imag + 0.0)
    with np.errstate(divide="ignore"):
        return np.log(w)


def complex_atanh(z):
    """Principal inverse hyperbolic tangent ``(Log(1+z) - Log(1-z)) / 2``.

    Extended so that ``Atanh(1) = +inf`` and ``Atanh(-1) = -inf`` (returned
    as real infinities).  Accepts scalars or arrays.
    """
    z_arr = np.asarray(z, dtype=complex)
    with np.errstate(invalid="ignore"):
        out = 0.5 * (_principal_log(1 + z_arr) - _principal_log(1 - z_arr))
    out = np.where(z_arr == 1, np.inf + 0j, out)
    out = np.where(z_arr == -1, -np.inf + 0j, out)
    if out.ndim == 0:
        v = complex(out)
        if np.isinf(v.real):
            return float(v.real)
        return v
    return out


def negative_spectrum_distance(R) -> float:
    """``min |lambda + 1|`` over the spectrum of ``R``."""
    from .eig import spectrum

    lam = spectrum(R)
    return float(np.min(np.abs(lam + 1)))


def in_negative_spectrum_set(R, tol: float = 1e-9) -> bool:
    """True when ``-1`` is an eigenvalue of ``R`` to within ``tol``."""
    return negative_spectrum_distance(R) <= tol


def haar_sample(n: int, seed) -> np.ndarray:
    """Haar-distributed rotation on SO(n), deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n))
    Qf, Rf = np.linalg.qr(G)
    Qf = Qf * np.where(np.diag(Rf) < 0, -1.0, 1.0)
    if np.linalg.det(Qf) < 0:
        Qf[:, -1] = -Qf[:, -1]
    return Qf


def random_projection(n: int, rank: int, seed, k: float = 1.0) -> ProjectionPair:
    """Projection onto a uniformly random ``rank``-dimensional subspace."""
    if rank == 0:
        return ProjectionPair(np.zeros((n, n)), k)
    rng = np.random.default_rng(seed)
    return ProjectionPair.from_basis(rng.standard_normal((rank, n)), k=k)


def check_prp_lemma(R, proj: ProjectionPair, tol: float = 1e-9) -> bool:
    """Does ``-1 not in sigma(R)`` imply ``-1 not in sigma(P R P)`` on this instance?

    The same tolerance decides membership on both sides.
    """
    from .eig import spectrum

    if in_negative_spectrum_set(R, tol):
        return True
    P = proj.P
    lam = spectrum(P @ R @ P)
    return bool(np.min(np.abs(lam + 1)) > tol)
