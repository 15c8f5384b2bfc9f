"""Scenario configuration: JSON documents, named presets and flag overrides.

A config is a JSON object.  Recognised keys::

    preset   "paper-sec8"
    n        dimension (inferred from P or R0 when omitted)
    P        diagonal 0/1 mask or a full matrix
    k        gain (default 1)
    R0       matrix, "identity", "paper-sec8", or {"haar_seed": int}
    seed     Haar seed for R0 when R0 is absent; base seed for Monte Carlo
    samples  Monte Carlo sample count
    dt, t_max, stop_V, method, out, format

Unknown keys are rejected so that typos do not silently fall back to
defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .integrate import METHODS, SimulationSpec
from .linalg import ProjectionPair, haar_sample, validate_rotation

__all__ = ["ConfigError", "ScenarioConfig", "PRESETS", "paper_sec8_R0", "load_config"]

_S2, _S3, _S6 = np.sqrt(2.0), np.sqrt(3.0), np.sqrt(6.0)


def paper_sec8_R0() -> np.ndarray:
    """The worked example's initial attitude."""
    return np.array(
        [
            [0.0, 1 / _S3, -2 / _S6],
            [1 / _S2, -1 / _S3, -1 / _S6],
            [-1 / _S2, -1 / _S3, -1 / _S6],
        ]
    )


PRESETS = {
    "paper-sec8": {"n": 3, "P": [0, 1, 0], "k": 1.0, "R0": "paper-sec8", "dt": 1e-3, "t_max": 10.0},
}

_KEYS = {"preset", "n", "P", "k", "R0", "seed", "samples", "dt", "t_max", "stop_V", "method", "out", "format"}


class ConfigError(ValueError):
    """Invalid scenario; the message names the offending field."""

    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


@dataclass(frozen=True)
class ScenarioConfig:
    proj: ProjectionPair
    R0: np.ndarray | None
    R0_source: str = "none"  # explicit | preset | haar | none
    dt: float = 1e-3
    t_max: float = 10.0
    stop_V: float = 1e-9
    method: str = "lie_rk4"
    seed: int | None = None
    samples: int = 1000
    out: str | None = None
    format: str = "csv"

    @property
    def n(self) -> int:
        return self.proj.n

    @property
    def k(self) -> float:
        return self.proj.k

    def require_R0(self) -> np.ndarray:
        if self.R0 is None:
            raise ConfigError("R0", "no initial attitude (give R0, a preset, or --seed)")
        return self.R0

    def spec(self, **over) -> SimulationSpec:
        kw = dict(proj=self.proj, R0=self.require_R0(), dt=self.dt, t_max=self.t_max, stop_V=self.stop_V, method=self.method)
        kw.update(over)
        return SimulationSpec(**kw)

    def with_(self, **over) -> "ScenarioConfig":
        return replace(self, **over)


def _matrix(field, value, n=None):
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(field, f"not a numeric array ({exc})") from None
    if not np.all(np.isfinite(M)):
        raise ConfigError(field, "non-finite entries")
    if n is not None and M.shape not in ((n,), (n, n)):
        raise ConfigError(field, f"shape {M.shape} does not match n = {n}")
    return M


def _parse_R0(value, n, seed):
    if value is None:
        if seed is None:
            return None, "none"
        return haar_sample(n, seed), "haar"
    if isinstance(value, str):
        if value == "identity":
            return np.eye(n), "explicit"
        if value == "paper-sec8":
            if n != 3:
                raise ConfigError("R0", "the paper-sec8 attitude is 3x3")
            return paper_sec8_R0(), "preset"
        raise ConfigError("R0", f"unknown named attitude {value!r}")
    if isinstance(value, dict):
        if set(value) != {"haar_seed"}:
            raise ConfigError("R0", 'object form must be {"haar_seed": int}')
        return haar_sample(n, int(value["haar_seed"])), "haar"
    M = _matrix("R0", value, n)
    if M.ndim != 2:
        raise ConfigError("R0", "expected an n x n matrix")
    try:
        return validate_rotation(M), "explicit"
    except ValueError as exc:
        raise ConfigError("R0", str(exc)) from None


def _positive(field, v, allow_zero=False):
    try:
        v = float(v)
    except (TypeError, ValueError):
        raise ConfigError(field, f"{v!r} is not a number") from None
    if not np.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        raise ConfigError(field, f"must be {'non-negative' if allow_zero else 'positive'}, got {v}")
    return v


def build_config(doc: dict) -> ScenarioConfig:
    """Validate a config document (after preset expansion and overrides)."""
    unknown = set(doc) - _KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    doc = dict(doc)
    preset = doc.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError("preset", f"unknown preset {preset!r}; known: {sorted(PRESETS)}")
        base = dict(PRESETS[preset])
        base.update({k: v for k, v in doc.items() if v is not None})
        doc = base
    k = _positive("k", doc.get("k", 1.0))
    seed = doc.get("seed")
    if seed is not None:
        try:
            seed = int(seed)
        except (TypeError, ValueError):
            raise ConfigError("seed", f"{seed!r} is not an integer") from None
        if seed < 0:
            raise ConfigError("seed", "must be non-negative")
    n = doc.get("n")
    P = doc.get("P")
    if n is None:
        if P is not None:
            n = len(P)
        elif isinstance(doc.get("R0"), list):
            n = len(doc["R0"])
        else:
            n = 3
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise ConfigError("n", f"must be an integer >= 2, got {n!r}")
    if P is None:
        if n != 3:
            raise ConfigError("P", "required unless n = 3 (where the worked example's P is the default)")
        P = PRESETS["paper-sec8"]["P"]
    Pm = _matrix("P", P, n)
    try:
        if Pm.ndim == 1:
            proj = ProjectionPair.from_diagonal(Pm, k)
        else:
            proj = ProjectionPair(Pm, k)
    except ValueError as exc:
        raise ConfigError("P", str(exc)) from None
    R0, source = _parse_R0(doc.get("R0"), n, seed)
    dt = _positive("dt", doc.get("dt", 1e-3))
    t_max = _positive("t_max", doc.get("t_max", 10.0))
    if dt > t_max:
        raise ConfigError("dt", f"dt = {dt} exceeds t_max = {t_max}")
    stop_V = _positive("stop_V", doc.get("stop_V", 1e-9), allow_zero=True)
    method = doc.get("method", "lie_rk4")
    if method not in METHODS:
        raise ConfigError("method", f"unknown method {method!r}; expected one of {list(METHODS)}")
    samples = doc.get("samples", 1000)
    if not isinstance(samples, int) or isinstance(samples, bool) or samples < 1:
        raise ConfigError("samples", f"must be an integer >= 1, got {samples!r}")
    fmt = doc.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("format", f"must be csv or json, got {fmt!r}")
    return ScenarioConfig(proj, R0, source, dt, t_max, stop_V, method, seed, samples, doc.get("out"), fmt)


def load_config(path: str | None = None, overrides: dict | None = None) -> ScenarioConfig:
    """Read a JSON config (optional), apply non-``None`` overrides, validate."""
    doc: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config", "top level must be a JSON object")
    for key, v in (overrides or {}).items():
        if v is not None:
            doc[key] = v
    return build_config(doc)
