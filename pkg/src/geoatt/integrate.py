"""Fixed-step integration of the closed loop on SO(n) and on the sphere.

Two schemes:

``lie_rk4``
    Fourth-order Runge-Kutta-Munthe-Kaas.  Stages live in so(n) and the
    state is only ever multiplied by exponentials of skew matrices, so it
    stays on SO(n) to rounding error.
``rk4_project``
    Classical RK4 in the ambient matrix space followed by a polar
    reprojection ``R (R^T R)^{-1/2}``.

All steppers work on stacks ``(B, n, n)`` so many initial conditions can be
advanced together.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import StepRejected
from .feedback import _closed_loop, _control_U, _effort, lyapunov
from .linalg import ProjectionPair, exp_skew, hat, orthogonality_residual, validate_rotation

log = logging.getLogger(__name__)

METHODS = ("lie_rk4", "rk4_project")

__all__ = [
    "METHODS",
    "SimulationSpec",
    "Trajectory",
    "SphereTrajectory",
    "step",
    "propagate",
    "simulate",
    "simulate_reduced",
    "trajectory_channels",
]


def _comm(A, B):
    return A @ B - B @ A


def _dexpinv(u, v):
    # truncated series of dexp_u^{-1}(v); exact enough for 4th order
    uv = _comm(u, v)
    return v - 0.5 * uv + _comm(u, uv) / 12.0


# hat(w) as a linear map R^3 -> R^9
_HAT9 = np.stack([hat(e).ravel() for e in np.eye(3)])
_VEE_IDX = ([2, 0, 1], [1, 2, 0])


def _cross(a, b):
    return (((a @ _HAT9).reshape(a.shape[:-1] + (3, 3))) @ b[..., None])[..., 0]


def _dexpinv_vec(u, v):
    # so(3) as R^3: the commutator is the cross product
    uv = _cross(u, v)
    return v - 0.5 * uv + _cross(u, uv) / 12.0


def _exp_vec(w):
    # Rodrigues with hat(w)^2 = w w^T - |w|^2 I; sinc keeps w = 0 exact
    th = np.sqrt(np.einsum("...i,...i->...", w, w))
    a = np.sinc(th / np.pi)
    b = 0.5 * np.sinc(th / (2 * np.pi)) ** 2
    out = (w @ _HAT9).reshape(w.shape[:-1] + (3, 3))
    out *= a[..., None, None]
    out += b[..., None, None] * (w[..., :, None] * w[..., None, :])
    # cos th = 1 - b th^2
    out.reshape(w.shape[:-1] + (9,))[..., ::4] += (1.0 - b * th * th)[..., None]
    return out


def _cofactor3(X):
    c = X.T
    return np.stack([np.cross(c[1], c[2]), np.cross(c[2], c[0]), np.cross(c[0], c[1])], axis=1)


class _So3Generator:
    """``vee`` of the feedback on SO(3) in closed vector form.

    With ``N = R Q`` and ``D = R^T - R`` the quadratic-gain term is
    ``N D N^T = hat(cof(N) vee(D))`` and ``cof(N) = R cof(Q)``, so only one
    stacked matrix-vector product is needed.  The ``P`` part is linear in
    the entries of ``R``.
    """

    def __init__(self, P, Q, k):
        basis = np.eye(9).reshape(9, 3, 3)
        H = basis @ P
        self.lin = (np.swapaxes(H, 1, 2) - H)[:, _VEE_IDX[0], _VEE_IDX[1]]
        skew_part = (np.swapaxes(basis, 1, 2) - basis)[:, _VEE_IDX[0], _VEE_IDX[1]]
        self.cub = skew_part @ _cofactor3(Q).T
        self.k = k if np.ndim(k) == 0 else np.asarray(k, dtype=float).reshape(-1, 1)

    def __call__(self, R):
        R9 = R.reshape(R.shape[:-2] + (9,))
        return R9 @ self.lin + self.k * (R @ (R9 @ self.cub)[..., None])[..., 0]


def _rkmk4(y, dt, gen, act, expo=exp_skew, dexpinv=_dexpinv):
    """One RKMK4 step for ``dy/dt = gen(y) . y``; ``act(g, y)`` applies a group element.

    ``expo`` and ``dexpinv`` act on whatever representation ``gen`` returns
    (skew matrices by default).
    """
    k1 = gen(y)
    th = 0.5 * dt * k1
    k2 = dexpinv(th, gen(act(expo(th), y)))
    th = 0.5 * dt * k2
    k3 = dexpinv(th, gen(act(expo(th), y)))
    th = dt * k3
    k4 = dexpinv(th, gen(act(expo(th), y)))
    th = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return act(expo(th), y)


def _matmul_act(g, R):
    return g @ R


def _polar(R):
    RT = np.swapaxes(R, -1, -2)
    w, V = np.linalg.eigh(RT @ R)
    inv_sqrt = (V / np.sqrt(w)[..., None, :]) @ np.swapaxes(V, -1, -2)
    return R @ inv_sqrt


def _rk4_project(R, dt, f):
    k1 = f(R)
    k2 = f(R + 0.5 * dt * k1)
    k3 = f(R + 0.5 * dt * k2)
    k4 = f(R + dt * k3)
    return _polar(R + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def _stepper(P, Q, k, method):
    if method == "lie_rk4":
        if P.shape[0] == 3:
            gen3 = _So3Generator(P, Q, k)
            return lambda R, dt: _rkmk4(R, dt, gen3, _matmul_act, _exp_vec, _dexpinv_vec)
        gen = lambda R: _control_U(R, P, Q, k)  # noqa: E731
        return lambda R, dt: _rkmk4(R, dt, gen, _matmul_act)
    if method == "rk4_project":
        f = lambda R: _closed_loop(R, P, Q, k)  # noqa: E731
        return lambda R, dt: _rk4_project(R, dt, f)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def step(R, proj: ProjectionPair, dt: float, method: str = "lie_rk4") -> np.ndarray:
    """Advance ``R`` (or a stack of rotations) by one step of size ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    R = np.asarray(R, dtype=float)
    out = _stepper(proj.P, proj.Q, proj.k, method)(R, dt)
    if not np.all(np.isfinite(out)):
        raise StepRejected(f"non-finite state after step of size {dt}")
    return out


def propagate(
    R0s,
    proj: ProjectionPair,
    dt: float,
    t_max: float,
    *,
    k=None,
    method: str = "lie_rk4",
    stop_V: float | None = None,
    record_every: int | None = None,
):
    """Integrate a stack of initial rotations ``(B, n, n)`` in lock step.

    ``k`` may override the gain per sample (shape ``(B,)``).  Integration ends
    at ``t_max`` or as soon as every sample has ``V < stop_V``.  When
    ``record_every`` is given, states are kept every that many steps (plus
    the final one).

    Returns ``(times, states)``; ``states`` has shape ``(T, B, n, n)`` when
    recording and ``(B, n, n)`` (final states) otherwise, with ``times`` the
    matching sample times or the final time.
    """
    R = np.array(R0s, dtype=float)
    if R.ndim != 3:
        raise ValueError("R0s must have shape (B, n, n)")
    gain = proj.k if k is None else np.asarray(k, dtype=float).reshape(-1, 1, 1)
    advance = _stepper(proj.P, proj.Q, gain, method)
    n_steps = int(round(t_max / dt))
    times, states = [0.0], [R.copy()]
    j = 0
    while j < n_steps:
        if stop_V is not None and np.all(lyapunov(R) < stop_V):
            break
        R = advance(R, dt)
        j += 1
        if not np.all(np.isfinite(R)):
            raise StepRejected(f"non-finite state at step {j}")
        if record_every and (j % record_every == 0):
            times.append(j * dt)
            states.append(R.copy())
    if not record_every:
        return j * dt, R
    if times[-1] != j * dt:
        times.append(j * dt)
        states.append(R.copy())
    return np.array(times), np.stack(states)


@dataclass(frozen=True)
class SimulationSpec:
    """Everything needed to reproduce one closed-loop run."""

    proj: ProjectionPair
    R0: np.ndarray
    dt: float = 1e-3
    t_max: float = 10.0
    stop_V: float = 1e-9
    method: str = "lie_rk4"

    def __post_init__(self):
        R0 = validate_rotation(self.R0)
        if R0.shape[0] != self.proj.n:
            raise ValueError(f"R0 is {R0.shape[0]}x{R0.shape[0]}, projection is {self.proj.n}x{self.proj.n}")
        if not (self.dt > 0 and self.t_max > 0 and self.dt <= self.t_max):
            raise ValueError("need 0 < dt <= t_max")
        if not self.stop_V >= 0:
            raise ValueError("stop_V must be non-negative")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        R0.flags.writeable = False
        object.__setattr__(self, "R0", R0)


@dataclass
class Trajectory:
    """Sampled closed-loop path with derived scalar channels.

    ``channels`` holds ``V``, ``Vdot``, ``normU_sq``, ``ortho_resid`` and, for
    each axis ``i`` (1-based), ``err_axis_i = arccos R_ii`` and
    ``dist_axis_i``, the distance travelled by the frame vector ``R e_i``.
    """

    times: np.ndarray
    states: np.ndarray
    channels: dict = field(default_factory=dict)
    converged: bool = False

    @property
    def n(self) -> int:
        return self.states.shape[-1]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class SphereTrajectory:
    times: np.ndarray
    states: np.ndarray
    channels: dict = field(default_factory=dict)


def _cumtrapz(y, t):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    if len(t) > 1:
        h = np.diff(t).reshape((-1,) + (1,) * (y.ndim - 1))
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * h, axis=0)
    return out


def trajectory_channels(times, states, proj: ProjectionPair) -> dict:
    """Derived per-sample scalars for a stack of states ``(T, n, n)``."""
    n = proj.n
    P, Q, k = proj.P, proj.Q, proj.k
    normU_sq, Vdot = _effort(states, P, Q, k)
    Rdot = _closed_loop(states, P, Q, k)
    speeds = np.linalg.norm(Rdot, axis=-2)  # column norms, (T, n)
    diag = np.diagonal(states, axis1=-2, axis2=-1)
    dist = _cumtrapz(speeds, times)
    ch = {
        "V": lyapunov(states),
        "Vdot": Vdot,
        "normU_sq": normU_sq,
        "ortho_resid": orthogonality_residual(states),
    }
    for i in range(n):
        ch[f"err_axis_{i + 1}"] = np.arccos(np.clip(diag[:, i], -1.0, 1.0))
    for i in range(n):
        ch[f"dist_axis_{i + 1}"] = dist[:, i]
    return ch


def simulate(spec: SimulationSpec) -> Trajectory:
    """Integrate until ``t_max`` or until ``V < stop_V``."""
    from .linalg import negative_spectrum_distance

    if negative_spectrum_distance(spec.R0) <= 1e-12:
        log.warning("initial condition lies on the set where -1 is an eigenvalue; it will not converge to I")
    proj = spec.proj
    advance = _stepper(proj.P, proj.Q, proj.k, spec.method)
    n_steps = int(round(spec.t_max / spec.dt))
    R = spec.R0.copy()
    states = [R]
    converged = bool(lyapunov(R) < spec.stop_V)
    for _ in range(n_steps):
        if converged:
            break
        R = advance(R, spec.dt)
        if not np.all(np.isfinite(R)):
            raise StepRejected(f"non-finite state at t = {len(states) * spec.dt:g}")
        states.append(R)
        converged = bool(lyapunov(R) < spec.stop_V)
    states = np.stack(states)
    times = spec.dt * np.arange(len(states))
    return Trajectory(times, states, trajectory_channels(times, states, proj), converged)


def _sphere_gen(target):
    def gen(r):
        # U = u r^T - r u^T moves r with velocity u - <u, r> r
        return target[:, None] * r[..., None, :] - r[..., :, None] * target[None, :]

    return gen


def _vec_act(g, r):
    return (g @ r[..., None])[..., 0]


def simulate_reduced(r0, dt: float = 1e-3, t_max: float = 10.0) -> SphereTrajectory:
    """Integrate ``dr/dt = e1 - <e1, r> r`` on the unit sphere.

    Channels: ``geodesic_error = arccos <e1, r>``, ``plane_deviation`` (size
    of the part of ``r`` outside ``span{e1, r0}``), ``speed`` and the
    travelled ``distance``.
    """
    r = np.array(r0, dtype=float)
    if abs(np.linalg.norm(r) - 1) > 1e-12:
        raise ValueError("r0 must be a unit vector")
    if not (dt > 0 and t_max >= dt):
        raise ValueError("need 0 < dt <= t_max")
    n = r.shape[0]
    e1 = np.zeros(n)
    e1[0] = 1.0
    if np.linalg.norm(r + e1) <= 1e-9:
        log.warning("r0 is antipodal to e1; this point is an unstable equilibrium")
    gen = _sphere_gen(e1)
    n_steps = int(round(t_max / dt))
    out = np.empty((n_steps + 1, n))
    out[0] = r
    for j in range(n_steps):
        r = _rkmk4(r, dt, gen, _vec_act)
        out[j + 1] = r
    times = dt * np.arange(n_steps + 1)
    b2 = out[0] - out[0, 0] * e1
    nb = np.linalg.norm(b2)
    inplane = out[:, :1] * e1
    if nb > 1e-12:
        b2 = b2 / nb
        inplane = inplane + (out @ b2)[:, None] * b2
    speed = np.linalg.norm(e1 - out[:, :1] * out, axis=-1)
    ch = {
        "geodesic_error": np.arccos(np.clip(out[:, 0], -1.0, 1.0)),
        "plane_deviation": np.linalg.norm(out - inplane, axis=-1),
        "speed": speed,
        "distance": _cumtrapz(speed, times),
    }
    return SphereTrajectory(times, out, ch)
