"""JSON definitions of systems, signals, controllers and Koopman checks."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .closedloop import DiscreteController, constant_reference, sine_reference
from .errors import ConfigError
from .exprdsl import Observable, VectorField
from .flow import IntegratorConfig, Method, NonlinearSystem
from .koopman import EigenPair
from .lifting import LinearSystem
from .signals import GridSpec, LiftedTrajectory, lift

__all__ = [
    "load_json", "system_from_dict", "grid_from_dict", "signal_from_dict",
    "controller_from_dict", "parse_complex",
]


def load_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno} "
            f"(char {exc.pos}): {exc.msg}"
        ) from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def _require(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return d[key]


def system_from_dict(d: dict) -> NonlinearSystem:
    """Accepts ``{"n", "m", "f", "h"}`` or the linear form ``{"A", "B", "C"}``."""
    if not isinstance(d, dict):
        raise ConfigError("system definition must be an object")
    if "A" in d:
        try:
            return LinearSystem(d["A"], d.get("B"), d.get("C")).to_nonlinear()
        except ValueError as exc:
            raise ConfigError(f"linear system: {exc}") from None
    f = _require(d, "f", "system")
    if isinstance(f, str) or not isinstance(f, list):
        raise ConfigError("system: 'f' must be a list of expression strings")
    n = int(d.get("n", len(f)))
    m = int(d.get("m", 0))
    h = d.get("h")
    fld = VectorField(list(f), n, m)
    return NonlinearSystem(fld, None if h is None else Observable(list(h), n))


def linear_system_from_dict(d: dict) -> LinearSystem | None:
    return LinearSystem(d["A"], d.get("B"), d.get("C")) if "A" in d else None


def grid_from_dict(d: dict | None, T=None, N=None) -> GridSpec:
    d = d or {}
    T = T if T is not None else _require(d, "T", "grid")
    N = N if N is not None else _require(d, "N", "grid")
    try:
        return GridSpec(float(T), int(N))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from None


def integrator_from(data: dict, grid: GridSpec, method=None) -> IntegratorConfig:
    try:
        return IntegratorConfig(grid, Method.parse(method or data.get("method", "rk4")))
    except ValueError:
        raise ConfigError(f"unknown integration method {method or data.get('method')!r}") from None


def _vector(value, dim: int, what: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1 and dim > 1:
        arr = np.full(dim, float(arr[0]))
    if arr.shape != (dim,):
        raise ConfigError(f"{what} must have {dim} entries, got {arr.size}")
    return arr


def _read_samples(path: Path) -> np.ndarray:
    try:
        rows = list(csv.reader(io.StringIO(path.read_text())))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    body = [r for r in rows[1:] if r]
    # first column is time
    return np.array([[float(v) for v in r[1:]] for r in body], dtype=float)


def signal_from_dict(d: dict | None, dim: int, grid: GridSpec, K: int, base_dir=".") -> LiftedTrajectory:
    """Build ``K`` lifted segments from a constant, sine or CSV-file description.

    ``None`` gives the zero signal.
    """
    if d is None:
        return constant_reference(np.zeros(dim), grid, K)
    kind = _require(d, "kind", "signal")
    if kind == "constant":
        return constant_reference(_vector(d.get("value", 0.0), dim, "constant value"), grid, K)
    if kind == "sine":
        return sine_reference(
            _vector(d.get("amplitude", 1.0), dim, "sine amplitude"),
            float(d.get("omega", 1.0)), grid, K,
            phase=float(d.get("phase", 0.0)),
            offset=_vector(d.get("offset", 0.0), dim, "sine offset"),
        )
    if kind == "file":
        path = Path(base_dir) / _require(d, "path", "file signal")
        samples = _read_samples(path)
        need = K * grid.N + 1
        if samples.ndim != 2 or samples.shape[0] < need or samples.shape[1] != dim:
            raise ConfigError(
                f"{path}: need at least {need} rows of {dim} values, got shape {samples.shape}"
            )
        return lift(samples[:need], grid)
    raise ConfigError(f"unknown signal kind {kind!r}")


def controller_from_dict(d: dict, m_c: int) -> DiscreteController:
    phi = _require(d, "phi", "controller")
    psi = _require(d, "psi", "controller")
    n_c = int(d.get("n_c", len(phi)))
    z0 = d.get("z0", [0.0] * n_c)
    if len(z0) != n_c:
        raise ConfigError(f"controller: z0 has {len(z0)} entries, n_c is {n_c}")
    if "m_c" in d and int(d["m_c"]) != m_c:
        raise ConfigError(f"controller: m_c={d['m_c']} but the plant has {m_c} outputs")
    return DiscreteController.from_strings(phi, psi, z0, m_c)


def parse_complex(value) -> complex:
    """A number, ``[re, im]`` pair, or Python-style string such as ``"1j"``."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigError(f"complex pair must have two entries, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError:
            raise ConfigError(f"cannot read complex number {value!r}") from None
    return complex(value)


def eigenpair_from_dict(d: dict) -> EigenPair:
    lam = parse_complex(_require(d, "lambda", "eigenpair"))
    phi = [parse_complex(c) for c in _require(d, "phi", "eigenpair")]
    return EigenPair(lam, phi)
