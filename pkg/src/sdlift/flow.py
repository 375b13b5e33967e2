"""Flow map of ``dx/dt = f(x, u)`` over one sampling period.

The period is cut into the ``N`` fast subintervals of a :class:`GridSpec` and
the ODE is stepped across them with forward Euler or classical RK4.  The
input is held at its left-node value on each subinterval, and every stage of
an RK4 step sees that held value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonFiniteStateError, ShapeError
from .exprdsl import Observable, Var, VectorField
from .signals import GridSpec, SampledSignal

__all__ = [
    "Method", "NonlinearSystem", "IntegratorConfig", "integrate", "flow_period",
    "flow_endpoint", "flow_periods", "measure_order", "observed_orders",
]


class Method(str, enum.Enum):
    EULER = "euler"
    RK4 = "rk4"

    @classmethod
    def parse(cls, value) -> Method:
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        aliases = {"forwardeuler": "euler", "forward_euler": "euler", "rk": "rk4"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class NonlinearSystem:
    """State equation ``f`` together with output map ``h``.

    When ``h`` is omitted the full state is observed.
    """

    f: VectorField
    h: Observable | None = None

    def __post_init__(self):
        if self.h is None:
            n = self.f.dim_state
            object.__setattr__(self, "h", Observable([Var("x", i) for i in range(n)], n))
        if self.f.dim_state != self.h.dim_state:
            raise ShapeError(
                f"f has state dimension {self.f.dim_state} but h expects {self.h.dim_state}"
            )

    @classmethod
    def from_strings(cls, f, h=None, n=None, m=0) -> NonlinearSystem:
        n = len(f) if n is None else n
        return cls(VectorField(list(f), n, m), None if h is None else Observable(list(h), n))

    @property
    def n(self) -> int:
        return self.f.dim_state

    @property
    def m(self) -> int:
        return self.f.dim_input

    @property
    def p(self) -> int:
        return self.h.dim_output


@dataclass(frozen=True)
class IntegratorConfig:
    grid: GridSpec
    method: Method = Method.RK4

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))


def _euler(f, x, u, h):
    return x + h * f(x, u)


def _rk4(f, x, u, h):
    k1 = f(x, u)
    k2 = f(x + (h / 2) * k1, u)
    k3 = f(x + (h / 2) * k2, u)
    k4 = f(x + h * k3, u)
    return x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


_STEPPERS = {Method.EULER: _euler, Method.RK4: _rk4}


def integrate(f, x0, held_inputs, step: float, n_steps: int, method=Method.RK4) -> np.ndarray:
    """Step ``dx/dt = f(x, u)`` ``n_steps`` times with fixed step ``step``.

    Parameters
    ----------
    f : callable
        ``f(x, u) -> ndarray``; a :class:`VectorField` works directly.
    x0 : array_like, shape (n,)
    held_inputs : array_like, shape (n_steps, m), or None
        Row ``i`` is the input held on step ``i``.  ``None`` means ``m = 0``.
    step, n_steps, method
        Fast step size, number of steps and integration scheme.

    Returns
    -------
    ndarray, shape (n_steps + 1, n)
        Row 0 is ``x0`` itself.

    Raises
    ------
    DomainError
        ``f`` could not be evaluated; ``err.step`` names the subinterval.
    NonFiniteStateError
        The state overflowed on some subinterval.
    """
    stepper = _STEPPERS[Method.parse(method)]
    x = np.array(x0, dtype=float)
    if x.ndim != 1:
        raise ShapeError(f"initial state must be a vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteStateError(0, x)
    if held_inputs is None:
        held_inputs = np.zeros((n_steps, 0))
    held_inputs = np.asarray(held_inputs, dtype=float)
    if held_inputs.ndim != 2 or held_inputs.shape[0] < n_steps:
        raise ShapeError(f"need {n_steps} held input rows, got shape {held_inputs.shape}")
    out = np.empty((n_steps + 1, x.size))
    out[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            try:
                x = stepper(f, x, held_inputs[i], step)
            except DomainError as exc:
                raise DomainError(str(exc), step=i) from exc
            if not np.all(np.isfinite(x)):
                raise NonFiniteStateError(i, x)
            out[i + 1] = x
    return out


def _held_rows(sys: NonlinearSystem, u: SampledSignal | None, grid: GridSpec):
    if u is None:
        return np.zeros((grid.N, sys.m))
    if u.grid != grid:
        raise ShapeError(f"input is sampled on {u.grid}, integrator expects {grid}")
    if u.dim != sys.m:
        raise ShapeError(f"input has dimension {u.dim}, system expects {sys.m}")
    return u.held_values()


def flow_period(sys: NonlinearSystem, x0, u: SampledSignal | None, cfg: IntegratorConfig) -> SampledSignal:
    """State trajectory over one period, sampled at the grid nodes.

    ``u=None`` is the zero input.  Row 0 is ``x0`` exactly.
    """
    grid = cfg.grid
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n,):
        raise ShapeError(f"initial state has shape {x0.shape}, expected ({sys.n},)")
    states = integrate(sys.f, x0, _held_rows(sys, u, grid), grid.step, grid.N, cfg.method)
    return SampledSignal(grid, states)


def flow_endpoint(sys: NonlinearSystem, x0, u: SampledSignal | None, cfg: IntegratorConfig) -> np.ndarray:
    return flow_period(sys, x0, u, cfg).end.copy()


def flow_periods(sys: NonlinearSystem, x0, u_samples, cfg: IntegratorConfig, periods: int) -> np.ndarray:
    """Single-shot flow over ``[0, periods*T]`` on the global fast grid.

    ``u_samples`` holds at least ``periods*N`` input rows on the global grid
    (extra rows are ignored) or is ``None`` for the zero input.  The step
    sequence is identical to chaining :func:`flow_period` period by period.
    """
    n_steps = periods * cfg.grid.N
    if u_samples is not None:
        u_samples = np.asarray(u_samples, dtype=float)
        if u_samples.ndim == 1:
            u_samples = u_samples[:, None]
        if u_samples.shape[1] != sys.m:
            raise ShapeError(f"input has dimension {u_samples.shape[1]}, system expects {sys.m}")
    else:
        u_samples = np.zeros((n_steps, sys.m))
    return integrate(sys.f, x0, u_samples, cfg.grid.step, n_steps, cfg.method)


def measure_order(sys, x0, u, method, N_list, T=1.0, reference=None):
    """Endpoint error of the fast-sampling flow for each ``N`` in ``N_list``.

    ``u`` is ``None`` or a callable ``theta -> input vector``, resampled on
    every grid.  ``reference`` is the exact endpoint; when omitted it is
    computed with RK4 on ``16 * max(N_list)`` subintervals.

    Returns a list of ``(N, error)`` pairs with sup-norm errors.
    """
    def run(N, meth):
        grid = GridSpec(T, N)
        sig = None if u is None else SampledSignal.from_function(u, grid)
        return flow_endpoint(sys, x0, sig, IntegratorConfig(grid, meth))

    if reference is None:
        reference = run(16 * max(N_list), Method.RK4)
    reference = np.atleast_1d(np.asarray(reference, dtype=float))
    return [(N, float(np.max(np.abs(run(N, method) - reference)))) for N in N_list]


def observed_orders(errors) -> list[float]:
    """Convergence order between consecutive ``(N, error)`` pairs.

    ``nan`` where either error is zero.
    """
    orders = []
    for (n1, e1), (n2, e2) in zip(errors, errors[1:]):
        if e1 == 0.0 or e2 == 0.0:
            orders.append(math.nan)
        else:
            orders.append(math.log(e1 / e2) / math.log(n2 / n1))
    return orders
