"""Koopman operators of an input-free system and their spectral checks.

``U(t)`` maps an observable ``h`` to ``x -> h(Phi(t) x)``; the lifted system
with period ``T`` has Koopman operator ``U_d = U(T)``.  Eigenvalues of the
generator ``L h = grad(h) . f`` map to ``exp(lambda * t)`` under ``U(t)``.
Nothing here searches for spectra: eigenpairs are supplied by the caller and
the module checks the relations they must satisfy.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import BadEigenPair, ShapeError
from .exprdsl import Observable, grad_observable
from .flow import IntegratorConfig, Method, NonlinearSystem, integrate
from .lifting import LinearSystem
from .signals import GridSpec

__all__ = [
    "KoopmanOperator", "apply_koopman", "generator_apply", "difference_quotient",
    "spectral_map", "EigenPair", "transition_matrix", "verify_linear_koopman",
    "nonlinear_eigenfunction_check",
]


def _steps_for(t: float, step: float) -> int:
    n = round(t / step)
    if t < 0 or abs(n * step - t) > 1e-9 * max(1.0, abs(t)):
        raise ShapeError(f"horizon {t!r} is not a non-negative multiple of the fine step {step!r}")
    return int(n)


def _flow_to(sys: NonlinearSystem, x, steps: int, step: float, method) -> np.ndarray:
    if sys.m:
        raise ShapeError("Koopman operators are defined here for input-free systems only")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return integrate(sys.f, x, None, step, steps, method)[-1]


@dataclass(frozen=True)
class KoopmanOperator:
    """``U(t)`` for an input-free system, realized with the fast-grid flow.

    ``t`` must be an integer multiple of ``cfg.grid.step`` so that ``U(t)``
    is exactly a composition of fine steps.
    """

    sys: NonlinearSystem
    cfg: IntegratorConfig
    t: float

    def __post_init__(self):
        if self.sys.m:
            raise ShapeError("Koopman operators are defined here for input-free systems only")
        object.__setattr__(self, "t", float(self.t))
        _steps_for(self.t, self.cfg.grid.step)

    @classmethod
    def lifted(cls, sys: NonlinearSystem, cfg: IntegratorConfig) -> KoopmanOperator:
        """The lifted-system operator ``U_d = U(T)``."""
        return cls(sys, cfg, cfg.grid.T)

    @property
    def steps(self) -> int:
        return _steps_for(self.t, self.cfg.grid.step)

    def flow(self, x) -> np.ndarray:
        return _flow_to(self.sys, x, self.steps, self.cfg.grid.step, self.cfg.method)

    def apply(self, h: Observable, x) -> np.ndarray:
        return h(self.flow(x))

    __call__ = apply


def apply_koopman(app: KoopmanOperator, h: Observable, x) -> np.ndarray:
    """``(U(t) h)(x) = h(Phi(t) x)``."""
    return app.apply(h, x)


def generator_apply(sys: NonlinearSystem, h: Observable, x, step: float | None = None) -> np.ndarray:
    """``(L h)(x) = grad(h)(x) @ f(x)`` with a central-difference gradient."""
    if sys.m:
        raise ShapeError("the generator is defined here for input-free systems only")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return grad_observable(h, x, step) @ sys.f(x, ())


def difference_quotient(sys: NonlinearSystem, h: Observable, x, delta: float,
                        method=Method.RK4) -> np.ndarray:
    """``((U(delta) h)(x) - h(x)) / delta`` using a single fine step of size ``delta``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return (h(_flow_to(sys, x, 1, delta, method)) - h(x)) / delta


def spectral_map(lam: complex, T: float) -> complex:
    """Image ``exp(lam * T)`` of a generator eigenvalue under ``U(T)``."""
    if not T > 0:
        raise ValueError("T must be positive")
    return cmath.exp(complex(lam) * T)


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Eigenvalue and eigenvector; the vector is normalized to unit 2-norm."""

    lam: complex
    phi: np.ndarray

    def __post_init__(self):
        phi = np.atleast_1d(np.asarray(self.phi, dtype=complex))
        norm = np.linalg.norm(phi)
        if phi.ndim != 1 or norm == 0 or not np.isfinite(norm):
            raise BadEigenPair("eigenvector must be a non-zero finite vector")
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "phi", phi / norm)


def transition_matrix(A, cfg: IntegratorConfig) -> np.ndarray:
    """One-period state transition of ``dx/dt = A x``, one flow per basis vector."""
    lin = LinearSystem(A, None, None)
    sys = lin.to_nonlinear()
    cols = [_flow_to(sys, e, cfg.grid.N, cfg.grid.step, cfg.method) for e in np.eye(lin.n)]
    return np.column_stack(cols)


def _cnum(z: complex) -> list[float]:
    return [z.real, z.imag]


def verify_linear_koopman(A, T: float, pairs, cfg: IntegratorConfig | None = None, *,
                          side: str = "left", eig_tol: float = 1e-8,
                          lifted_tol: float = 1e-6) -> dict:
    """Check that eigenvalues of ``A`` reappear as ``exp(lam*T)`` after lifting.

    With ``side="left"`` each pair must satisfy ``phi^T A = lam phi^T`` and the
    check is ``phi^T M_T = exp(lam T) phi^T``, where ``M_T`` is the computed
    one-period transition matrix.  Because the Koopman operator of a linear
    flow is ``M_T^T``, this is the same as ``U_d phi = exp(lam T) phi``.
    ``side="right"`` checks ``A phi = lam phi`` and ``M_T phi = exp(lam T) phi``
    instead, i.e. ``phi^T U_d = exp(lam T) phi^T``.

    Raises :class:`BadEigenPair` if a supplied pair misses its eigen-relation
    by more than ``eig_tol``.  Returns a JSON-ready report.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if cfg is None:
        cfg = IntegratorConfig(GridSpec(T, 256))
    if cfg.grid.T != float(T):
        raise ShapeError(f"integrator period {cfg.grid.T!r} differs from T={T!r}")
    M = transition_matrix(A, cfg)
    checks = []
    for i, pair in enumerate(pairs):
        if not isinstance(pair, EigenPair):
            pair = EigenPair(*pair)
        phi, lam = pair.phi, pair.lam
        if phi.size != A.shape[0]:
            raise BadEigenPair(f"pair {i}: vector length {phi.size}, matrix order {A.shape[0]}")
        op = A.T if side == "left" else A
        eig_res = float(np.linalg.norm(op @ phi - lam * phi))
        if eig_res > eig_tol:
            raise BadEigenPair(f"pair {i}: eigen-relation residual {eig_res:.3e} exceeds {eig_tol:g}")
        mu = spectral_map(lam, T)
        lifted = M.T @ phi if side == "left" else M @ phi
        lifted_res = float(np.linalg.norm(lifted - mu * phi))
        mu_hat = complex(np.vdot(phi, lifted))
        mu_err = abs(mu_hat - mu)
        checks.append({
            "lambda": _cnum(lam),
            "phi": [_cnum(complex(c)) for c in phi],
            "eigen_residual": eig_res,
            "lifted_residual": lifted_res,
            "expected_lifted_eigenvalue": _cnum(mu),
            "lifted_eigenvalue": _cnum(mu_hat),
            "eigenvalue_error": mu_err,
            "passed": bool(lifted_res <= lifted_tol and mu_err <= lifted_tol),
        })
    return {
        "kind": "linear",
        "side": side,
        "T": float(T),
        "N": cfg.grid.N,
        "method": cfg.method.value,
        "eigen_tolerance": eig_tol,
        "lifted_tolerance": lifted_tol,
        "transition_matrix": M.tolist(),
        "pairs": checks,
        "passed": all(c["passed"] for c in checks),
    }


def nonlinear_eigenfunction_check(sys: NonlinearSystem, phi: Observable, lam, t_list, x_samples,
                                  cfg: IntegratorConfig, tol: float = 1e-6) -> dict:
    """Largest ``|phi(Phi(t) x) - exp(lam t) phi(x)|`` over the given horizons and states.

    Every ``t`` must be a multiple of the fine step ``cfg.grid.step``.
    """
    if phi.dim != 1:
        raise ShapeError("candidate eigenfunction must be scalar-valued")
    lam = complex(lam)
    step = cfg.grid.step
    rows = []
    for t in t_list:
        n = _steps_for(float(t), step)
        for x in x_samples:
            x = np.atleast_1d(np.asarray(x, dtype=float))
            lhs = phi(_flow_to(sys, x, n, step, cfg.method))[0]
            rhs = cmath.exp(lam * t) * phi(x)[0]
            rows.append({"t": float(t), "x": x.tolist(), "residual": abs(lhs - rhs)})
    worst = max((r["residual"] for r in rows), default=0.0)
    return {
        "kind": "nonlinear",
        "lambda": _cnum(lam),
        "tolerance": tol,
        "max_residual": worst,
        "samples": rows,
        "passed": bool(worst <= tol),
    }
