"""Matrix exponential by scaling and squaring of a truncated Taylor series."""

from __future__ import annotations

import math

import numpy as np

from .errors import NonFiniteError, ShapeError

__all__ = ["expm", "held_input_discretization"]


def expm(M) -> np.ndarray:
    """Matrix exponential of a square real or complex matrix.

    ``M`` is scaled by ``2**-s`` until its 1-norm is at most 1/2, the Taylor
    series is summed until the next term is below machine epsilon relative
    to the partial sum, and the result is squared ``s`` times.  Agrees with
    Pade-based implementations to about 1e-13 relative for moderate norms.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"expm needs a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteError("matrix has non-finite entries")
    n = M.shape[0]
    dtype = np.result_type(M.dtype, float)
    ident = np.eye(n, dtype=dtype)
    if n == 0:
        return ident
    norm = float(np.max(np.sum(np.abs(M), axis=0)))
    s = math.ceil(math.log2(norm / 0.5)) if norm > 0.5 else 0
    X = M.astype(dtype) / 2.0**s
    tol = np.finfo(float).eps

    result = ident.copy()
    term = ident.copy()
    for k in range(1, 60):
        term = term @ X / k
        result = result + term
        if np.max(np.abs(term)) <= tol * np.max(np.abs(result)):
            break
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            result = result @ result
    if not np.all(np.isfinite(result)):
        raise NonFiniteError("matrix exponential overflowed")
    return result


def held_input_discretization(A, B, dt: float):
    """Exact one-step map of ``dx/dt = Ax + Bu`` with ``u`` held over ``dt``.

    Returns ``(Ad, Bd)`` with ``Ad = exp(A dt)`` and
    ``Bd = int_0^dt exp(A s) ds B``, read off the exponential of the
    augmented matrix ``[[A, B], [0, 0]] dt``.  Valid for singular ``A``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n, m = B.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = A
    aug[:n, n:] = B
    E = expm(aug * dt)
    return E[:n, :n], E[:n, n:]
