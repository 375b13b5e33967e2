"""Lifted discrete-time form of a continuous-time system.

For a nonlinear plant the lifted state is itself a function on the period:
segment ``k + 1`` is the flow from the end value of segment ``k`` under the
input segment ``u[k + 1]``, and the output segment is ``h`` applied node by
node.  Note that ``u[k + 1]`` feeds ``x[k + 1]``; the lifted plant on its own
is not strictly causal.

For linear plants the same quantities have closed forms in terms of matrix
exponentials; :func:`linear_lift_operators` builds them on the held-input
grid so they can be compared with the generic path node for node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError, ShapeError
from .exprdsl import Add, Num, Observable, VectorField, linear_form
from .flow import IntegratorConfig, NonlinearSystem, flow_period
from .linalg import held_input_discretization
from .signals import GridSpec, LiftedTrajectory, SampledSignal

__all__ = [
    "LiftedStep", "lifted_step", "run_lifted", "LinearSystem", "LinearLiftOperators",
    "linear_lift_operators", "linear_lifted_step",
]


@dataclass(frozen=True)
class LiftedStep:
    state: SampledSignal
    output: SampledSignal


def _output_segment(sys: NonlinearSystem, state: SampledSignal) -> SampledSignal:
    return SampledSignal(state.grid, np.array([sys.h(row) for row in state.values]))


def lifted_step(sys: NonlinearSystem, x_prev_end, u_next: SampledSignal | None,
                cfg: IntegratorConfig) -> LiftedStep:
    """One step of the lifted plant.

    Parameters
    ----------
    sys : NonlinearSystem
    x_prev_end : array_like
        End value ``x[k](T)`` of the previous state segment.
    u_next : SampledSignal or None
        Input segment ``u[k + 1]`` for the period being produced.
    cfg : IntegratorConfig

    Returns
    -------
    LiftedStep
        ``x[k + 1]`` and ``y[k + 1] = h(x[k + 1])``.  Row 0 of the state is
        ``x_prev_end`` bit for bit, and state row ``j`` depends only on input
        rows ``0..j-1``.
    """
    state = flow_period(sys, x_prev_end, u_next, cfg)
    return LiftedStep(state, _output_segment(sys, state))


def run_lifted(sys: NonlinearSystem, x0, u: LiftedTrajectory | None, cfg: IntegratorConfig,
               steps: int | None = None):
    """Iterate :func:`lifted_step` from ``x0``.

    Segment ``k`` of the state is driven by input segment ``k``.  With
    ``u=None`` the input is zero and ``steps`` gives the number of periods.

    Returns ``(states, outputs)`` as two :class:`LiftedTrajectory` objects.
    """
    if u is None:
        if steps is None or steps < 1:
            raise ShapeError("steps must be a positive integer when no input is given")
        inputs = [None] * steps
    else:
        if u.grid != cfg.grid:
            raise ShapeError(f"input is on {u.grid}, integrator expects {cfg.grid}")
        inputs = list(u.segments if steps is None else u.segments[:steps])
        if steps is not None and len(inputs) < steps:
            raise ShapeError(f"input has {len(u)} segments, {steps} requested")
    states, outputs = [], []
    x_end = np.asarray(x0, dtype=float)
    for u_k in inputs:
        step = lifted_step(sys, x_end, u_k, cfg)
        states.append(step.state)
        outputs.append(step.output)
        x_end = step.state.end
    return LiftedTrajectory(cfg.grid, states), LiftedTrajectory(cfg.grid, outputs)


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """``dx/dt = A x + B u``, ``y = C x``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ShapeError(f"A must be square, got {A.shape}")
        B = np.zeros((n, 0)) if self.B is None else np.asarray(self.B, dtype=float)
        B = B.reshape(n, -1) if B.size else np.zeros((n, 0))
        C = np.eye(n) if self.C is None else np.atleast_2d(np.asarray(self.C, dtype=float))
        if C.shape[1] != n:
            raise ShapeError(f"C must have {n} columns, got {C.shape}")
        for name, M in (("A", A), ("B", B), ("C", C)):
            if not np.all(np.isfinite(M)):
                raise ValueError(f"{name} has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def to_nonlinear(self) -> NonlinearSystem:
        """The same plant written as expressions, for the generic integrators."""
        comps = []
        for i in range(self.n):
            fx = linear_form(self.A[i], "x")
            if self.m:
                fu = linear_form(self.B[i], "u")
                if fx == Num(0.0):
                    fx = fu
                elif fu != Num(0.0):
                    fx = Add(fx, fu)
            comps.append(fx)
        f = VectorField(comps, self.n, self.m)
        h = Observable([linear_form(row, "x") for row in self.C], self.n)
        return NonlinearSystem(f, h)


@dataclass(frozen=True, eq=False)
class LinearLiftOperators:
    """Closed-form lifted operators on the held-input grid.

    ``Bop`` and ``Dop`` act on the stacked held input ``u_stack`` of length
    ``N*m`` (rows ``0..N-1`` of an input segment, flattened).  ``Cop`` and
    ``Dop`` stack the ``N + 1`` node outputs, ``p`` rows per node.
    """

    grid: GridSpec
    Amat: np.ndarray
    Bop: np.ndarray
    Cop: np.ndarray
    Dop: np.ndarray
    dims: tuple[int, int, int]


def linear_lift_operators(lin: LinearSystem, grid: GridSpec) -> LinearLiftOperators:
    n, m, p = lin.n, lin.m, lin.p
    N = grid.N
    Ad, Bd = held_input_discretization(lin.A, lin.B, grid.step)
    # powers[j] = Ad^j
    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(powers[-1] @ Ad)
    Amat = powers[N]
    Bop = np.zeros((n, N * m))
    for j in range(N):
        Bop[:, j * m:(j + 1) * m] = powers[N - 1 - j] @ Bd
    Cop = np.zeros(((N + 1) * p, n))
    Dop = np.zeros(((N + 1) * p, N * m))
    CB = [lin.C @ powers[i] @ Bd for i in range(N)]
    for j in range(N + 1):
        Cop[j * p:(j + 1) * p] = lin.C @ powers[j]
        for i in range(j):
            Dop[j * p:(j + 1) * p, i * m:(i + 1) * m] = CB[j - 1 - i]
    for M in (Amat, Bop, Cop, Dop):
        if not np.all(np.isfinite(M)):
            raise NonFiniteError("lifted operator overflowed")
        M.flags.writeable = False
    return LinearLiftOperators(grid, Amat, Bop, Cop, Dop, (n, m, p))


def linear_lifted_step(ops: LinearLiftOperators, x_k, u_stack):
    """``x[k+1] = Amat x[k] + Bop u[k]`` and ``y[k] = Cop x[k] + Dop u[k]``.

    ``u_stack`` may also be an input :class:`SampledSignal`, whose held rows
    are stacked.  Returns ``(x_next, y_segment)``.
    """
    n, m, p = ops.dims
    if isinstance(u_stack, SampledSignal):
        u_stack = u_stack.held_values().ravel()
    x_k = np.asarray(x_k, dtype=float)
    u_stack = np.zeros(ops.grid.N * m) if u_stack is None else np.asarray(u_stack, dtype=float).ravel()
    if x_k.shape != (n,):
        raise ShapeError(f"state has shape {x_k.shape}, expected ({n},)")
    if u_stack.shape != (ops.grid.N * m,):
        raise ShapeError(f"stacked input has shape {u_stack.shape}, expected ({ops.grid.N * m},)")
    x_next = ops.Amat @ x_k + ops.Bop @ u_stack
    y = ops.Cop @ x_k + ops.Dop @ u_stack
    return x_next, SampledSignal(ops.grid, y.reshape(ops.grid.N + 1, p))

