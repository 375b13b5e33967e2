"""Functions on one sampling interval and the lifting operator.

A :class:`SampledSignal` holds a function on ``[0, T]`` by its values at the
``N + 1`` uniform nodes ``theta_j = j*T/N``.  Row ``N`` is the left limit at
``T``; for lifted state streams it is the value handed to the next period.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ContinuityError, ShapeError, SignalRangeError

__all__ = [
    "GridSpec", "SampledSignal", "LiftedTrajectory", "lift", "unlift", "eval_signal",
    "global_times", "signal_to_csv", "signal_from_csv", "format_float",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform subdivision of ``[0, T]`` into ``N`` fast subintervals."""

    T: float
    N: int

    def __post_init__(self):
        T = float(self.T)
        if not (math.isfinite(T) and T > 0.0):
            raise ValueError(f"period T must be positive and finite, got {self.T!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"subdivision count N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "N", int(self.N))

    @property
    def step(self) -> float:
        """Fast step ``T/N``; every integrator in the package uses exactly this value."""
        return self.T / self.N

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.arange(self.N + 1) * self.T / self.N
        nodes[-1] = self.T
        nodes.flags.writeable = False
        return nodes


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """A ``d``-vector valued function on one period, stored as an ``(N+1, d)`` array."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != self.grid.N + 1 or values.shape[1] < 1:
            raise ShapeError(
                f"expected values of shape ({self.grid.N + 1}, d), got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("signal values must be finite")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def constant(cls, value, grid: GridSpec) -> SampledSignal:
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(value, (grid.N + 1, 1)))

    @classmethod
    def from_function(cls, fn, grid: GridSpec) -> SampledSignal:
        return cls(grid, np.array([np.atleast_1d(fn(th)) for th in grid.nodes], dtype=float))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def start(self) -> np.ndarray:
        return self.values[0]

    @property
    def end(self) -> np.ndarray:
        """Value at ``theta = T`` (the left limit stored in row ``N``)."""
        return self.values[-1]

    def held_values(self) -> np.ndarray:
        """Rows ``0..N-1``: the value held on each fast subinterval."""
        return self.values[:-1]

    def __eq__(self, other):
        if not isinstance(other, SampledSignal):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None

    def __call__(self, theta: float) -> np.ndarray:
        return eval_signal(self, theta)


@dataclass(frozen=True, eq=False)
class LiftedTrajectory:
    """Sequence of per-period segments sharing one grid and dimension."""

    grid: GridSpec
    segments: tuple[SampledSignal, ...]

    def __post_init__(self):
        segments = tuple(self.segments)
        if not segments:
            raise ShapeError("a lifted trajectory needs at least one segment")
        dim = segments[0].dim
        for k, seg in enumerate(segments):
            if seg.grid != self.grid:
                raise ShapeError(f"segment {k} is on grid {seg.grid}, expected {self.grid}")
            if seg.dim != dim:
                raise ShapeError(f"segment {k} has dimension {seg.dim}, expected {dim}")
        object.__setattr__(self, "segments", segments)

    @property
    def dim(self) -> int:
        return self.segments[0].dim

    def __len__(self):
        return len(self.segments)

    def __getitem__(self, k) -> SampledSignal:
        return self.segments[k]

    def __iter__(self):
        return iter(self.segments)

    def __eq__(self, other):
        if not isinstance(other, LiftedTrajectory):
            return NotImplemented
        return self.grid == other.grid and len(self) == len(other) and all(
            a == b for a, b in zip(self.segments, other.segments)
        )

    __hash__ = None


def lift(samples, grid: GridSpec) -> LiftedTrajectory:
    """Split globally sampled data into per-period segments.

    Parameters
    ----------
    samples : array_like, shape (K*N + 1, d) or (K*N + 1,)
        Samples on the global grid of step ``T/N``, covering ``K`` whole
        periods plus the terminal node.
    grid : GridSpec

    Returns
    -------
    LiftedTrajectory
        ``K`` segments; segment ``k`` row ``j`` is sample ``k*N + j``, so the
        last row of a segment and the first row of the next are the same
        sample.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.ndim != 2:
        raise ShapeError(f"samples must be 1-D or 2-D, got {samples.ndim}-D")
    M, N = samples.shape[0], grid.N
    if M < N + 1 or (M - 1) % N != 0:
        raise ShapeError(
            f"{M} samples do not cover a whole number of periods: need K*{N} + 1 rows"
        )
    K = (M - 1) // N
    return LiftedTrajectory(
        grid, tuple(SampledSignal(grid, samples[k * N:(k + 1) * N + 1]) for k in range(K))
    )


def unlift(lt: LiftedTrajectory) -> np.ndarray:
    """Concatenate segments back onto the global grid, dropping shared nodes.

    Adjacent segments must agree at the shared node to within
    ``1e-9 * (1 + |value|)`` per component, otherwise :class:`ContinuityError`.
    """
    segs = lt.segments
    for k in range(len(segs) - 1):
        a, b = segs[k].end, segs[k + 1].start
        gap = np.abs(a - b)
        if np.any(gap > 1e-9 * (1.0 + np.maximum(np.abs(a), np.abs(b)))):
            raise ContinuityError(k, float(np.max(gap)))
    parts = [segs[0].values] + [s.values[1:] for s in segs[1:]]
    return np.concatenate(parts, axis=0)


def eval_signal(s: SampledSignal, theta: float) -> np.ndarray:
    """Piecewise-linear evaluation of ``s`` at ``theta`` in ``[0, T]``; exact at nodes."""
    theta = float(theta)
    T = s.grid.T
    if not (0.0 <= theta <= T):
        raise SignalRangeError(f"theta={theta!r} lies outside [0, {T!r}]")
    nodes = s.grid.nodes
    j = int(np.searchsorted(nodes, theta, side="right")) - 1
    if nodes[j] == theta:
        return s.values[j].copy()
    a, b = s.values[j], s.values[j + 1]
    w = (theta - nodes[j]) / (nodes[j + 1] - nodes[j])
    out = a + w * (b - a)
    # rounding must not push the interpolant past its bracketing values
    return np.clip(out, np.minimum(a, b), np.maximum(a, b))


def global_times(grid: GridSpec, n_rows: int) -> np.ndarray:
    """Time stamps ``k*T + theta_j`` for rows of an unlifted global array.

    Row ``i`` maps to ``k, j = divmod(i, N)`` so the same row index always
    yields the same float, whichever routine produced the array.
    """
    k, j = np.divmod(np.arange(n_rows), grid.N)
    return k * grid.T + grid.nodes[j]


def format_float(v: float) -> str:
    """Shortest decimal string that round-trips to ``v``."""
    return repr(float(v))


def signal_to_csv(s: SampledSignal, path=None) -> str:
    """Write ``s`` as CSV with header ``theta,v0,...``; returns the text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta"] + [f"v{i}" for i in range(s.dim)])
    for theta, row in zip(s.grid.nodes, s.values):
        w.writerow([format_float(theta)] + [format_float(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def signal_from_csv(source, T: float | None = None) -> SampledSignal:
    """Read a CSV produced by :func:`signal_to_csv` (path or text).

    The grid is recovered from the theta column: ``N`` is the row count minus
    one and ``T`` the last theta unless given explicitly.
    """
    text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], [r for r in rows[1:] if r]
    if not header or header[0] != "theta":
        raise ShapeError("signal CSV must start with a 'theta' column")
    data = np.array([[float(v) for v in r] for r in body], dtype=float)
    if data.shape[0] < 2:
        raise ShapeError("signal CSV needs at least two rows")
    grid = GridSpec(float(data[-1, 0]) if T is None else T, data.shape[0] - 1)
    if not np.allclose(data[:, 0], grid.nodes, rtol=0, atol=1e-12 * grid.T):
        raise ShapeError("theta column is not a uniform grid on [0, T]")
    return SampledSignal(grid, data[:, 1:])

