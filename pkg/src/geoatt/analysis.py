"""Stability analytics for the closed loop.

Equilibria are the symmetric rotations commuting with ``P``; apart from the
identity they have an even number ``i`` of eigenvalues ``-1`` and
``V = trace(I - R) = 2i``.  At an equilibrium the linearization acts on
tangent vectors ``X = S R`` as

    F(X) = -X P R - R P X + k R Q (X^T - X) Q,

and is represented here in the orthonormal basis
``E_ab = (e_a e_b^T - e_b e_a^T) / sqrt(2)``, ``a < b`` (lexicographic).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .eig import spectrum
from .errors import InconsistentParameters, NotAnEquilibrium, RankMismatch
from .feedback import _closed_loop, lyapunov
from .integrate import SphereTrajectory, Trajectory, propagate
from .linalg import ProjectionPair, haar_sample

__all__ = [
    "lyapunov",
    "EquilibriumClass",
    "BasinReport",
    "GeodesicReport",
    "skew_basis",
    "classify_equilibrium",
    "linearization_matrix",
    "linearization_spectrum",
    "predicted_identity_spectrum",
    "group_eigenvalues",
    "binomial_split_identity",
    "unstable_count",
    "equilibrium_split",
    "kernel_dimension",
    "constraint_kernel_dimension",
    "instability_bound",
    "diagonal_saddles",
    "monte_carlo_basin",
    "geodesic_deviation",
]


@dataclass(frozen=True)
class EquilibriumClass:
    """``kind`` is ``"identity"``, ``"saddle"`` or ``"non_equilibrium"``; ``i`` is set for saddles."""

    kind: str
    i: int | None
    residuals: dict

    def __str__(self):
        return f"saddle({self.i})" if self.kind == "saddle" else self.kind


def skew_basis(n: int) -> np.ndarray:
    """Orthonormal basis of so(n), shape ``(n(n-1)/2, n, n)``."""
    pairs = list(combinations(range(n), 2))
    E = np.zeros((len(pairs), n, n))
    for j, (a, b) in enumerate(pairs):
        E[j, a, b] = 1.0
        E[j, b, a] = -1.0
    return E / np.sqrt(2.0)


def classify_equilibrium(R, proj: ProjectionPair, tol: float = 1e-8) -> EquilibriumClass:
    R = np.asarray(R, dtype=float)
    n = R.shape[0]
    res = {
        "symmetry": float(np.linalg.norm(R.T - R)),
        "commutation": float(np.linalg.norm(R @ proj.P - proj.P @ R)),
        "stationarity": float(np.linalg.norm(_closed_loop(R, proj.P, proj.Q, proj.k))),
    }
    if np.linalg.norm(R - np.eye(n)) <= tol:
        return EquilibriumClass("identity", None, res)
    if max(res.values()) <= tol:
        # V = 2i with i the number of -1 eigenvalues
        V = float(lyapunov(R))
        i = int(round(V / 2.0))
        if 2 <= i <= n and i % 2 == 0 and abs(V - 2 * i) <= tol:
            return EquilibriumClass("saddle", i, res)
    return EquilibriumClass("non_equilibrium", None, res)


def _require_equilibrium(R, proj, tol):
    c = classify_equilibrium(R, proj, tol)
    if c.kind == "non_equilibrium":
        raise NotAnEquilibrium(f"R is not an equilibrium (residuals {c.residuals})")
    return c


def linearization_matrix(R, proj: ProjectionPair, tol: float = 1e-8) -> np.ndarray:
    """Matrix of ``F`` in the basis ``{E_ab R}``; raises :class:`NotAnEquilibrium`."""
    R = np.asarray(R, dtype=float)
    _require_equilibrium(R, proj, tol)
    P, Q, k = proj.P, proj.Q, proj.k
    E = skew_basis(R.shape[0])
    X = E @ R
    XT = np.swapaxes(X, -1, -2)
    FX = -X @ P @ R - R @ P @ X + k * (R @ Q @ (XT - X) @ Q)
    # coordinates of F(X) R^T in the skew basis: column j is F(E_j R)
    return np.einsum("iab,jab->ij", E, FX @ R.T)


def linearization_spectrum(R, proj: ProjectionPair, tol: float = 1e-8) -> np.ndarray:
    return spectrum(linearization_matrix(R, proj, tol))


def group_eigenvalues(lam, tol: float = 1e-8):
    """Collapse nearly equal (real) eigenvalues into ``[(value, multiplicity)]``."""
    lam = np.sort_complex(np.asarray(lam, dtype=complex))
    out = []
    for z in lam:
        if out and abs(out[-1][0] - z) <= tol:
            v, m = out[-1]
            out[-1] = (v, m + 1)
        else:
            out.append((z, 1))
    return [(float(v.real) if abs(v.imag) <= tol else complex(v), m) for v, m in out]


def predicted_identity_spectrum(n: int, p: int, k: float):
    """Eigenvalues of the linearization at ``I`` with their multiplicities.

    Blocks of size ``C(p,2)``, ``p(n-p)`` and ``C(n-p,2)`` sit at ``-2``,
    ``-1`` and ``-2k``; empty blocks are dropped and coinciding values
    (``k = 1/2`` or ``k = 1``) are merged.  Sorted by eigenvalue.
    """
    if not 0 <= p <= n:
        raise ValueError("need 0 <= p <= n")
    mult: dict[float, int] = {}
    for value, m in ((-2.0, comb(p, 2)), (-1.0, p * (n - p)), (-2.0 * k, comb(n - p, 2))):
        if m:
            mult[value] = mult.get(value, 0) + m
    return sorted(mult.items())


def binomial_split_identity(n: int, k: int) -> bool:
    """``C(n,2) = C(k,2) + k(n-k) + C(n-k,2)``, checked in exact integer arithmetic."""
    return comb(n, 2) == comb(k, 2) + k * (n - k) + comb(n - k, 2)


def unstable_count(n: int, m: int, i: int, j: int) -> int:
    """Number of linearization eigenvalues off the imaginary axis at a saddle.

    ``m = rank P``, ``i`` = multiplicity of the eigenvalue ``-1`` of ``R``,
    ``j`` = how many of those ``-1`` eigenvectors lie in the range of ``P``.
    The blockwise count and its closed form are both evaluated and must agree.
    """
    for name, v in (("n", n), ("m", m), ("i", i), ("j", j)):
        if int(v) != v or v < 0:
            raise InconsistentParameters(f"{name} = {v} is not a non-negative integer")
    if m > n or i > n or i % 2:
        raise InconsistentParameters(f"need m <= n, i <= n and i even (n={n}, m={m}, i={i})")
    if j > min(i, m) or i - j > n - m:
        raise InconsistentParameters(f"the -1 eigenspace cannot split as j={j}, i-j={i - j} in ranks {m}, {n - m}")
    ib = i - j
    blocks = comb(j, 2) + comb(m - j, 2) + m * (n - m) + comb(ib, 2) + comb(n - m - ib, 2)
    closed = comb(n, 2) - j * (m - j) - ib * (n - m - ib)
    if blocks != closed:  # pragma: no cover - algebraic identity
        raise AssertionError("unstable count formulas disagree")
    return closed


def equilibrium_split(R, proj: ProjectionPair, tol: float = 1e-6):
    """``(n, m, i, j)`` for an equilibrium ``R``.

    At an equilibrium ``(I - R)/2`` is the projection onto the ``-1``
    eigenspace and commutes with ``P``, so ``i = trace((I - R)/2)`` and
    ``j = trace(P (I - R)/2)``.  Non-integral values mean the split is
    ill-conditioned and raise :class:`InconsistentParameters`.
    """
    R = np.asarray(R, dtype=float)
    n = R.shape[0]
    N = 0.5 * (np.eye(n) - R)
    vals = {"m": float(np.trace(proj.P)), "i": float(np.trace(N)), "j": float(np.trace(proj.P @ N))}
    out = {}
    for name, v in vals.items():
        r = round(v)
        if abs(v - r) > tol:
            raise InconsistentParameters(f"{name} = {v:.3e} is not close to an integer")
        out[name] = int(r)
    return n, out["m"], out["i"], out["j"]


def _nullity(M, rtol: float = 1e-8) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return int(M.shape[1])
    return int(np.sum(s < rtol * s[0]))


def kernel_dimension(R, proj: ProjectionPair, tol: float = 1e-8) -> int:
    """Numerical nullity of the linearization (relative singular-value threshold ``1e-8``)."""
    return _nullity(linearization_matrix(R, proj, tol))


def constraint_kernel_dimension(R, proj: ProjectionPair, tol: float = 1e-8) -> int:
    """Dimension of ``{S in so(n) : S R + R S = 0, P S = S P}``, from the constraint system."""
    R = np.asarray(R, dtype=float)
    _require_equilibrium(R, proj, tol)
    E = skew_basis(R.shape[0])
    P = proj.P
    A = np.concatenate(
        [(E @ R + R @ E).reshape(len(E), -1), (P @ E - E @ P).reshape(len(E), -1)], axis=1
    ).T
    if A.shape[1] == 0:
        return 0
    return _nullity(A)


def instability_bound(n: int, m: int, i: int, j: int, k: float) -> float:
    """Largest real eigenvalue of the linearization at a saddle with split ``(m, i, j)``.

    Two ``-1`` directions inside the range of ``P`` give ``2``, two inside the
    range of ``Q`` give ``2k``; otherwise the best guaranteed value is ``1``
    (a ``-1`` direction in one range paired with a ``+1`` direction in the
    other).
    """
    unstable_count(n, m, i, j)
    cands = [1.0] if i > 0 else []
    if j >= 2:
        cands.append(2.0)
    if i - j >= 2:
        cands.append(2.0 * k)
    return max(cands) if cands else 0.0


def diagonal_saddles(n: int):
    """All pairs ``(R, mask)`` with ``R`` diagonal, an even positive number of ``-1`` entries, and ``P = diag(mask)``.

    Enumerated in a fixed order; every equilibrium class is reachable this
    way up to conjugation.
    """
    out = []
    for i in range(2, n + 1, 2):
        for neg in combinations(range(n), i):
            d = np.ones(n)
            d[list(neg)] = -1.0
            for m in range(n + 1):
                for rng_p in combinations(range(n), m):
                    mask = np.zeros(n)
                    mask[list(rng_p)] = 1.0
                    out.append((np.diag(d), mask))
    return out


@dataclass
class BasinReport:
    samples: int
    converged: int
    failures: list = field(default_factory=list)
    t_max: float = 40.0
    dt: float = 1e-3
    stop_V: float = 1e-9
    seed: int | None = None
    method: str = "lie_rk4"

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "converged": self.converged,
            "failures": [{"seed": s, "final_V": v} for s, v in self.failures],
            "t_max": self.t_max,
            "dt": self.dt,
            "stop_V": self.stop_V,
            "seed": self.seed,
            "method": self.method,
        }


def _thread_count(threads):
    if threads is None:
        threads = int(os.environ.get("GEOATT_THREADS", "1") or 1)
    return max(1, int(threads))


def monte_carlo_basin(
    n: int,
    proj: ProjectionPair,
    samples: int,
    seed: int = 0,
    *,
    dt: float = 1e-3,
    t_max: float = 40.0,
    stop_V: float = 1e-9,
    method: str = "lie_rk4",
    R0=None,
    threads: int | None = None,
    chunk: int = 250,
) -> BasinReport:
    """Fraction of Haar-random initial rotations driven to ``V < stop_V``.

    Sample ``s`` uses the ``s``-th child of ``SeedSequence(seed)``, so the
    report depends only on the arguments, not on chunking or threads.  ``R0``
    forces every sample to start from the given rotation (the seeds are then
    only labels).  ``threads`` (default: ``GEOATT_THREADS`` or 1) runs chunks
    concurrently.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if proj.n != n:
        raise ValueError(f"projection is {proj.n}x{proj.n}, expected n = {n}")
    children = np.random.SeedSequence(seed).spawn(samples)
    labels = [int(c.generate_state(1)[0]) for c in children]
    if R0 is not None:
        forced = np.asarray(R0, dtype=float)
        starts = np.broadcast_to(forced, (samples, n, n)).copy()
    else:
        starts = np.stack([haar_sample(n, c) for c in children])

    def run(lo):
        _, Rf = propagate(starts[lo : lo + chunk], proj, dt, t_max, method=method, stop_V=stop_V)
        return lyapunov(Rf)

    los = list(range(0, samples, chunk))
    nt = _thread_count(threads)
    if nt > 1 and len(los) > 1:
        with ThreadPoolExecutor(max_workers=nt) as ex:
            finals = list(ex.map(run, los))
    else:
        finals = [run(lo) for lo in los]
    V = np.concatenate(finals)
    ok = V < stop_V
    failures = [(labels[s], float(V[s])) for s in np.flatnonzero(~ok)]
    return BasinReport(samples, int(ok.sum()), failures, t_max, dt, stop_V, seed, method)


@dataclass(frozen=True)
class GeodesicReport:
    """``deviation``: largest distance of the geodesic axis from its great-circle plane.

    ``travelled`` and ``initial`` hold, per axis, the travelled distance at
    the last sample and the initial geodesic distance ``arccos R_ii(0)``.
    """

    deviation: float
    axis: int
    travelled: np.ndarray
    initial: np.ndarray


def _plane_deviation(path, target):
    r0 = path[0]
    b = r0 - (r0 @ target) * target
    nb = np.linalg.norm(b)
    inplane = np.outer(path @ target, target)
    if nb > 1e-12:
        b /= nb
        inplane += np.outer(path @ b, b)
    return float(np.max(np.linalg.norm(path - inplane, axis=-1)))


def geodesic_deviation(traj, proj: ProjectionPair) -> GeodesicReport:
    """Great-circle diagnostics for a run with a rank-one ``P = e e^T``.

    For a full-attitude trajectory the geodesic axis is the column ``R e``,
    which moves toward ``e``; for a sphere trajectory it is ``r`` itself.
    """
    if proj.rank != 1:
        raise RankMismatch(f"geodesic diagnostics need rank P = 1, got {proj.rank}")
    w, V = np.linalg.eigh(proj.P)
    e = V[:, -1]
    e = e * np.sign(e[np.argmax(np.abs(e))])
    if isinstance(traj, SphereTrajectory):
        path = traj.states
        travelled = np.array([traj.channels["distance"][-1]])
        initial = np.array([np.arccos(np.clip(path[0] @ e, -1.0, 1.0))])
        return GeodesicReport(_plane_deviation(path, e), 0, travelled, initial)
    if not isinstance(traj, Trajectory):
        raise TypeError("expected a Trajectory or SphereTrajectory")
    n = traj.n
    axis = int(np.argmax(np.abs(e)))
    path = traj.states @ e
    ch = traj.channels
    travelled = np.array([ch[f"dist_axis_{i + 1}"][-1] for i in range(n)])
    initial = np.arccos(np.clip(np.diagonal(traj.states[0]), -1.0, 1.0))
    return GeodesicReport(_plane_deviation(path, e), axis, travelled, initial)
