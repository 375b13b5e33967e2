"""Acceptance suite: one check per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python tests/test_acceptance.py``.
"""

import contextlib
import io
import json
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from sdlift.cli import main as cli_main
from sdlift.closedloop import (
    DiscreteController, ZeroOrderHold, constant_reference, run_closed_loop,
)
from sdlift.exprdsl import Observable
from sdlift.flow import IntegratorConfig, NonlinearSystem, flow_periods, measure_order, observed_orders
from sdlift.koopman import (
    KoopmanOperator, apply_koopman, difference_quotient, generator_apply,
    nonlinear_eigenfunction_check, spectral_map, verify_linear_koopman,
)
from sdlift.lifting import LinearSystem, lifted_step, linear_lift_operators, linear_lifted_step, run_lifted
from sdlift.signals import GridSpec, SampledSignal, lift, unlift


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


# -- 1 ------------------------------------------------------------------------------

def criterion_1():
    with Timer() as tm:
        lin = LinearSystem([[0.0, 1.0], [-1.0, 0.0]], [[0.0], [1.0]], [[1.0, 0.0]])
        g = GridSpec(1.0, 64)
        K = 5
        ops = linear_lift_operators(lin, g)
        cfg = IntegratorConfig(g, "rk4")
        nl = lin.to_nonlinear()
        rng = np.random.default_rng(1)
        x_gen = x_lin = np.array([0.5, -0.2])
        worst = 0.0
        for _ in range(K):
            u = SampledSignal(g, rng.uniform(-1.0, 1.0, size=(g.N + 1, 1)))
            step = lifted_step(nl, x_gen, u, cfg)
            x_lin, y_lin = linear_lifted_step(ops, x_lin, u)
            worst = max(worst, float(np.max(np.abs(step.output.values - y_lin.values))))
            x_gen = step.state.end
    ok = worst <= 1e-6 and tm.elapsed < 1.0
    return ok, f"sup |y_generic - y_linear| = {worst:.2e} (<= 1e-6), {tm.elapsed:.3f} s (< 1 s)"


# -- 2 ------------------------------------------------------------------------------

def criterion_2():
    rng = np.random.default_rng(2)
    bad = 0
    with Timer() as tm:
        for _ in range(100):
            K, N, d = (int(v) for v in rng.integers(1, [9, 33, 5]))
            s = rng.normal(size=(K * N + 1, d)) * 10.0 ** rng.integers(-300, 300)
            if not np.array_equal(unlift(lift(s, GridSpec(float(rng.uniform(0.01, 10)), N))), s):
                bad += 1
    ok = bad == 0 and tm.elapsed < 1.0
    return ok, f"{100 - bad}/100 bitwise round trips, {tm.elapsed:.3f} s (< 1 s)"


# -- 3 ------------------------------------------------------------------------------

def criterion_3():
    fixtures = [
        (NonlinearSystem.from_strings(["-x0"], ["x0"]), [1.0], GridSpec(1.0, 64), 3, None),
        (NonlinearSystem.from_strings(["0", "0"]), [2.0, -1.0], GridSpec(1.0, 4), 4, None),
        (NonlinearSystem.from_strings(["x1", "-x0 - 0.3*x1^3 + u0"], ["x0"], m=1),
         [1.0, 0.0], GridSpec(0.3, 12), 6, lambda n: np.sin(np.arange(n) * 0.37)[:, None]),
        (NonlinearSystem.from_strings(["-x0^3 + u0*x0"], ["x0^2"], m=1),
         [0.8], GridSpec(0.7, 9), 5, lambda n: np.cos(np.arange(n) * 1.3)[:, None]),
    ]
    failures = []
    for i, (sys_, x0, g, K, make_u) in enumerate(fixtures):
        for method in ("euler", "rk4"):
            cfg = IntegratorConfig(g, method)
            samples = None if make_u is None else make_u(K * g.N + 1)
            u = None if samples is None else lift(samples, g)
            states, _ = run_lifted(sys_, x0, u, cfg, steps=K)
            joined = all(np.array_equal(a.end, b.start)
                         for a, b in zip(states.segments, states.segments[1:]))
            single = np.array_equal(unlift(states), flow_periods(sys_, x0, samples, cfg, K))
            if not (joined and single):
                failures.append(f"fixture {i} {method}")
    ok = not failures
    detail = "all 8 runs continuous and equal to the single-shot flow, bitwise"
    return ok, detail if ok else "failed: " + ", ".join(failures)


# -- 4 ------------------------------------------------------------------------------

ORDER_FIXTURES = [
    ("x'=-x", ["-x0"], math.exp(-1.0)),
    ("x'=-x^3", ["-x0^3"], 1.0 / math.sqrt(3.0)),
]
ORDER_BANDS = {"euler": (0.8, 1.2), "rk4": (3.5, 4.5)}


def criterion_4():
    parts, ok = [], True
    with Timer() as tm:
        for label, f, exact in ORDER_FIXTURES:
            sys_ = NonlinearSystem.from_strings(f)
            for method, (lo, hi) in ORDER_BANDS.items():
                errs = measure_order(sys_, [1.0], None, method, [8, 16, 32, 64, 128],
                                     reference=[exact])
                orders = observed_orders(errs)
                good = all(lo <= p <= hi for p in orders)
                ok &= good
                parts.append(f"{label} {method} [{', '.join(f'{p:.2f}' for p in orders)}]"
                             + ("" if good else f" outside [{lo}, {hi}]"))
    ok &= tm.elapsed < 1.0
    return ok, "; ".join(parts) + f"; {tm.elapsed:.3f} s (< 1 s)"


# -- 5 ------------------------------------------------------------------------------

def criterion_5():
    s = 1 / math.sqrt(2)
    cases = [
        (np.diag([-1.0, -2.0]), 0.5, 256, [(-1.0, [1.0, 0.0]), (-2.0, [0.0, 1.0])]),
        (np.array([[0.0, 1.0], [-1.0, 0.0]]), math.pi, 512,
         [(1j, [s, -1j * s]), (-1j, [s, 1j * s])]),
    ]
    worst_res, worst_map = 0.0, 0.0
    with Timer() as tm:
        for A, T, N, pairs in cases:
            rep = verify_linear_koopman(A, T, pairs, IntegratorConfig(GridSpec(T, N), "rk4"))
            worst_res = max([worst_res] + [p["lifted_residual"] for p in rep["pairs"]])
            for lam, _ in pairs:
                lam = complex(lam)
                analytic = math.exp(lam.real * T) * complex(math.cos(lam.imag * T),
                                                            math.sin(lam.imag * T))
                worst_map = max(worst_map, abs(spectral_map(lam, T) - analytic))
    ok = worst_res <= 1e-6 and worst_map <= 1e-12 and tm.elapsed < 2.0
    return ok, (f"max lifted residual {worst_res:.2e} (<= 1e-6), spectral_map error "
                f"{worst_map:.2e} (<= 1e-12), {tm.elapsed:.3f} s (< 2 s)")


# -- 6 ------------------------------------------------------------------------------

def random_smooth_system(rng, n):
    terms = []
    for i in range(n):
        lin = " + ".join(f"({rng.uniform(-1, 1)!r})*x{j}" for j in range(n))
        terms.append(f"{lin} + ({rng.uniform(-0.5, 0.5)!r})*sin(x{(i + 1) % n})")
    h = [f"cos(x0) + ({rng.uniform(-1, 1)!r})*x{n - 1}^2", f"tanh(x{n - 1})"]
    return NonlinearSystem.from_strings(terms, h)


def criterion_6():
    rng = np.random.default_rng(6)
    matched = 0
    for _ in range(20):
        n = int(rng.integers(1, 4))
        sys_ = random_smooth_system(rng, n)
        cfg = IntegratorConfig(GridSpec(float(rng.uniform(0.1, 2.0)), int(rng.integers(1, 80))),
                               str(rng.choice(["euler", "rk4"])))
        x = rng.normal(size=n)
        via_koopman = apply_koopman(KoopmanOperator(sys_, cfg, cfg.grid.T), sys_.h, x)
        via_lift = lifted_step(sys_, x, None, cfg).output.values[-1]
        matched += bool(np.array_equal(via_koopman, via_lift))
    return matched == 20, f"{matched}/20 randomized fixtures equal bitwise"


# -- 7 ------------------------------------------------------------------------------

def criterion_7():
    fixtures = [
        # (f, h, x, analytic grad h . f)
        (["-x0"], "x0", [2.0], lambda x, y: -x),
        (["-x0"], "x0^2", [3.0], lambda x, y: -2 * x * x),
        (["-x0^3"], "x0^4 - x0", [1.3], lambda x, y: (4 * x**3 - 1) * (-x**3)),
        (["x1", "-x0 - x1^3"], "x0^2 + x0*x1", [0.7, -1.3],
         lambda x, y: (2 * x + y) * y + x * (-x - y**3)),
        (["x0*x1", "1 - x0^2"], "x0^3*x1 - 2*x1^2", [-0.4, 1.1],
         lambda x, y: 3 * x**2 * y * (x * y) + (x**3 - 4 * y) * (1 - x**2)),
    ]
    worst = 0.0
    for f, h, x, exact in fixtures:
        n = len(f)
        sys_ = NonlinearSystem.from_strings(f)
        got = generator_apply(sys_, Observable([h], n), x)[0]
        worst = max(worst, abs(got - exact(*(x + [0.0])[:2])))
    # difference quotient on dx/dt = -x, h = x^2 at x = 3
    sys_ = NonlinearSystem.from_strings(["-x0"])
    h = Observable(["x0^2"], 1)
    L = generator_apply(sys_, h, [3.0])[0]
    deltas = [1e-2, 1e-3, 1e-4]
    errs = [abs(difference_quotient(sys_, h, [3.0], d)[0] - L) for d in deltas]
    C = [e / d for e, d in zip(errs, deltas)]
    slopes = [math.log10(e1 / e2) for e1, e2 in zip(errs, errs[1:])]
    linear = all(0.9 <= s <= 1.1 for s in slopes) and max(C) <= 1.2 * min(C)
    ok = worst <= 1e-5 and linear
    return ok, (f"max |generator - grad h . f| = {worst:.2e} (<= 1e-5); quotient error / delta = "
                f"[{', '.join(f'{c:.3f}' for c in C)}], log10 slopes "
                f"[{', '.join(f'{s:.3f}' for s in slopes)}]")


# -- 8 ------------------------------------------------------------------------------

class PerturbedOutput:
    """Adds ``delta`` to output evaluation number ``call`` (call 0 is psi(z0))."""

    def __init__(self, ctrl, call, delta):
        self.ctrl, self.call, self.delta, self.calls = ctrl, call, delta, 0
        self.z0 = ctrl.z0

    def update(self, z, e):
        return self.ctrl.update(z, e)

    def output(self, z):
        v = self.ctrl.output(z)
        if self.calls == self.call:
            v = v + self.delta
        self.calls += 1
        return v


def integrator_recursion(K, T, r=1.0):
    # sampled plant state a, controller state z, input u currently applied
    a, z, u, out = 0.0, 0.0, 0.0, []
    for _ in range(K):
        out.append(a)
        v = z
        z = r - a
        a = a + T * u
        u = v
    return out


def criterion_8():
    ctrl = DiscreteController.from_strings(["e0"], ["z0"], [0.0], m_c=1)
    g = GridSpec(0.1, 16)
    cfg = IntegratorConfig(g)
    K = 10
    plant = NonlinearSystem.from_strings(["-x0 + u0"], ["x0"], m=1)
    r = constant_reference(1.0, g, K)
    base = run_closed_loop(plant, ctrl, ZeroOrderHold(), r, [0.2], cfg, K)
    delay_ok = True
    for k in range(K - 1):
        pert = run_closed_loop(plant, PerturbedOutput(ctrl, k + 1, 0.5), ZeroOrderHold(), r,
                               [0.2], cfg, K)
        same = all(np.array_equal(base[j].x.values, pert[j].x.values)
                   and np.array_equal(base[j].y.values, pert[j].y.values) for j in range(k + 1))
        changed = not np.array_equal(base[k + 1].x.values, pert[k + 1].x.values)
        delay_ok &= same and changed

    integ = NonlinearSystem.from_strings(["u0"], ["x0"], m=1)
    K = 50
    recs = run_closed_loop(integ, ctrl, ZeroOrderHold(), constant_reference(1.0, g, K), [0.0],
                           cfg, K)
    got = np.array([rec.x.values[0, 0] for rec in recs])
    dev = float(np.max(np.abs(got - integrator_recursion(K, g.T))))
    ok = delay_ok and dev <= 1e-12
    return ok, (f"psi perturbation confined to later segments: {delay_ok}; integrator recursion "
                f"max deviation {dev:.1e} over K=50 (rounding only, <= 1e-12)")


# -- 9 ------------------------------------------------------------------------------

def criterion_9():
    sys_ = NonlinearSystem.from_strings(["-x0"])
    cfg = IntegratorConfig(GridSpec(1.0, 128), "rk4")
    t, x = [0.25, 0.5, 1.0], [-2.0, -1.0, 0.5, 3.0]
    r1 = nonlinear_eigenfunction_check(sys_, Observable(["x0"], 1), -1.0, t, x, cfg)
    r2 = nonlinear_eigenfunction_check(sys_, Observable(["x0^2"], 1), -2.0, t, x, cfg)
    ok = r1["max_residual"] <= 1e-6 and r2["max_residual"] <= 1e-6
    return ok, f"phi=x residual {r1['max_residual']:.2e}, phi=x^2 residual {r2['max_residual']:.2e} (<= 1e-6)"


# -- 10 -----------------------------------------------------------------------------

CLI_CASES = {
    "simulate": {"system": {"n": 2, "m": 1, "f": ["x1", "-sin(x0) + u0"], "h": ["x0"]},
                 "grid": {"T": 0.25, "N": 20}, "x0": [1.0, 0.0], "steps": 8,
                 "input": {"kind": "sine", "amplitude": 0.3, "omega": 1.7}},
    "closedloop": {"plant": {"n": 1, "m": 1, "f": ["-x0^3 + u0"], "h": ["x0"]},
                   "controller": {"phi": ["0.5*z0 + e0"], "psi": ["0.8*z0"], "z0": [0.1]},
                   "reference": {"kind": "sine", "amplitude": 1.0, "omega": 2.0},
                   "grid": {"T": 0.1, "N": 16}, "x0": [0.3], "steps": 30},
    "koopman": {"linear": [{"A": [[0, 1], [-1, 0]], "T": math.pi, "N": 512,
                            "pairs": [{"lambda": "1j", "phi": [[0.6, 0], [0, -0.6]]}]}],
                "nonlinear": [{"system": {"n": 1, "f": ["-x0"]}, "phi": "x0", "lambda": -1,
                               "t": [0.5], "x": [1.0, -2.0], "grid": {"T": 1.0, "N": 64}}]},
}
CLI_CASES["lift"] = CLI_CASES["simulate"]


def _tree(root: Path):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def criterion_10():
    mismatched = []
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for command, data in CLI_CASES.items():
            cfg = tmp / f"{command}.json"
            cfg.write_text(json.dumps(data))
            trees = []
            for rep in range(3):
                out = tmp / f"{command}_{rep}"
                with contextlib.redirect_stdout(io.StringIO()):
                    code = cli_main([command, "--config", str(cfg), "--out", str(out)])
                trees.append(_tree(out) if code == 0 else None)
            if trees[0] is None or not trees[0] or any(t != trees[0] for t in trees[1:]):
                mismatched.append(command)
    ok = not mismatched
    return ok, ("simulate, lift, closedloop, koopman: 3 runs each byte-identical" if ok
                else "differing or failing: " + ", ".join(mismatched))


CRITERIA = [
    (1, "linear-lifting equivalence", criterion_1),
    (2, "lift/unlift round trip", criterion_2),
    (3, "segment continuity and single-shot equivalence", criterion_3),
    (4, "fast-sampling convergence orders", criterion_4),
    (5, "spectral mapping of the lifted flow", criterion_5),
    (6, "lifted Koopman operator equals U(T)", criterion_6),
    (7, "generator and difference quotient", criterion_7),
    (8, "closed-loop delay semantics", criterion_8),
    (9, "nonlinear eigenfunction residuals", criterion_9),
    (10, "CLI determinism", criterion_10),
]


def run_criterion(number, title, fn):
    ok, detail = fn()
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'} {title}: {detail}"
    return ok, line


@pytest.mark.parametrize("number, title, fn", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(number, title, fn, capsys):
    ok, line = run_criterion(number, title, fn)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(*c) for c in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
