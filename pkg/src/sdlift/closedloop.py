"""Unity-feedback sampled-data loop with a discrete controller.

Per period ``k``::

    e[k](theta) = r[k](theta) - y[k](theta)
    z[k+1]      = phi(z[k], e[k](0))
    v[k]        = psi(z[k])
    x[k+1]      = flow from x[k](T) under hold(v[k])

Period 0 is driven by ``hold(psi(z0))``; from then on each segment's input is
known before the segment is integrated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SdliftError, ShapeError
from .exprdsl import ExprMap
from .flow import IntegratorConfig, NonlinearSystem
from .lifting import lifted_step
from .signals import GridSpec, LiftedTrajectory, SampledSignal, unlift

__all__ = [
    "DiscreteController", "ZeroOrderHold", "ClosedLoopStep", "run_closed_loop",
    "constant_reference", "sine_reference", "state_stream",
]


@dataclass(frozen=True)
class DiscreteController:
    """Strictly proper controller ``z+ = phi(z, e)``, ``v = psi(z)``."""

    phi: ExprMap
    psi: ExprMap
    z0: tuple[float, ...]

    def __post_init__(self):
        z0 = tuple(float(v) for v in np.atleast_1d(self.z0))
        object.__setattr__(self, "z0", z0)
        if [name for name, _ in self.phi.variables] != ["z", "e"]:
            raise DimensionMismatch("phi must be declared over (z, e)")
        if [name for name, _ in self.psi.variables] != ["z"]:
            raise DimensionMismatch("psi may depend on the controller state z only")
        n_c = self.phi.variables[0][1]
        if self.phi.dim != n_c or self.psi.variables[0][1] != n_c or len(z0) != n_c:
            raise DimensionMismatch(
                f"controller state dimension disagrees: phi gives {self.phi.dim}, "
                f"declared {n_c}, z0 has {len(z0)}"
            )

    @classmethod
    def from_strings(cls, phi, psi, z0, m_c: int) -> DiscreteController:
        n_c = len(z0)
        return cls(
            ExprMap(tuple(phi), (("z", n_c), ("e", m_c))),
            ExprMap(tuple(psi), (("z", n_c),)),
            tuple(z0),
        )

    @property
    def n_c(self) -> int:
        return len(self.z0)

    @property
    def m_c(self) -> int:
        return self.phi.variables[1][1]

    @property
    def p_c(self) -> int:
        return self.psi.dim

    def update(self, z, e) -> np.ndarray:
        return self.phi(z, e)

    def output(self, z) -> np.ndarray:
        return self.psi(z)


class ZeroOrderHold:
    """Hold a discrete value constant over the whole period."""

    def __call__(self, v, grid: GridSpec) -> SampledSignal:
        return SampledSignal.constant(v, grid)

    def __repr__(self):
        return "ZeroOrderHold()"


@dataclass(frozen=True)
class ClosedLoopStep:
    k: int
    x: SampledSignal
    y: SampledSignal
    e: SampledSignal
    z: np.ndarray
    v: np.ndarray
    u: SampledSignal  # input that drove x over this period


def _check_dims(sys, ctrl, r, K):
    # duck-typed controllers without declared dimensions are checked at run time
    p_c, m_c = getattr(ctrl, "p_c", sys.m), getattr(ctrl, "m_c", sys.p)
    if p_c != sys.m:
        raise DimensionMismatch(f"controller emits {p_c} values, plant takes {sys.m} inputs")
    if m_c != sys.p:
        raise DimensionMismatch(f"controller reads {m_c} errors, plant has {sys.p} outputs")
    if r.dim != sys.p:
        raise DimensionMismatch(f"reference has dimension {r.dim}, plant output {sys.p}")
    if len(r) < K:
        raise ShapeError(f"reference has {len(r)} segments, {K} steps requested")


def run_closed_loop(sys: NonlinearSystem, ctrl, hold, r: LiftedTrajectory, x0,
                    cfg: IntegratorConfig, K: int) -> list[ClosedLoopStep]:
    """Simulate ``K`` periods of the sampled-data loop.

    Parameters
    ----------
    sys : NonlinearSystem
        Plant; its input dimension must equal the controller output dimension.
    ctrl : DiscreteController
        Anything with ``z0``, ``update(z, e)`` and ``output(z)`` works.
        ``output`` is called once for the initial input and then once per
        period, in order.
    hold : callable
        ``hold(v, grid) -> SampledSignal``, e.g. :class:`ZeroOrderHold`.
    r : LiftedTrajectory
        Reference, at least ``K`` segments.
    x0 : array_like
    cfg : IntegratorConfig
    K : int

    Returns
    -------
    list of ClosedLoopStep
    """
    if r.grid != cfg.grid:
        raise ShapeError(f"reference is on {r.grid}, integrator expects {cfg.grid}")
    _check_dims(sys, ctrl, r, K)
    grid = cfg.grid
    z = np.asarray(ctrl.z0, dtype=float)
    u = hold(ctrl.output(z), grid)
    x_end = np.asarray(x0, dtype=float)
    records = []
    for k in range(K):
        try:
            step = lifted_step(sys, x_end, u, cfg)
            e = SampledSignal(grid, r[k].values - step.output.values)
            v = np.asarray(ctrl.output(z), dtype=float)
            records.append(ClosedLoopStep(k, step.state, step.output, e, z, v, u))
            z = np.asarray(ctrl.update(z, e.values[0]), dtype=float)
            u = hold(v, grid)
        except SdliftError as exc:
            if exc.period is None:
                exc.period = k
            raise
        x_end = step.state.end
    return records


def constant_reference(value, grid: GridSpec, K: int) -> LiftedTrajectory:
    seg = SampledSignal.constant(value, grid)
    return LiftedTrajectory(grid, (seg,) * K)


def sine_reference(amplitude, omega: float, grid: GridSpec, K: int, phase: float = 0.0,
                   offset=0.0) -> LiftedTrajectory:
    """``offset + amplitude * sin(omega * t + phase)`` sampled at ``t = kT + theta_j``."""
    amplitude = np.atleast_1d(np.asarray(amplitude, dtype=float))
    offset = np.broadcast_to(np.asarray(offset, dtype=float), amplitude.shape)
    segs = []
    for k in range(K):
        t = k * grid.T + grid.nodes
        segs.append(SampledSignal(grid, offset + np.sin(omega * t + phase)[:, None] * amplitude))
    return LiftedTrajectory(grid, segs)


def state_stream(records) -> np.ndarray:
    """Closed-loop state on the global fast grid (segments unlifted)."""
    return unlift(LiftedTrajectory(records[0].x.grid, [rec.x for rec in records]))
