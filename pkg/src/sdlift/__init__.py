"""Lifting of nonlinear sampled-data systems.

Flow maps by fast sampling, the lifted discrete-time plant, the closed loop
with a discrete controller, and Koopman spectral checks.
"""

from .closedloop import (
    ClosedLoopStep, DiscreteController, ZeroOrderHold, constant_reference, run_closed_loop,
    sine_reference,
)
from .errors import *  # noqa: F401,F403
from .exprdsl import Observable, VectorField, eval_expr, grad_observable, parse_expr, to_text
from .flow import (
    IntegratorConfig, Method, NonlinearSystem, flow_endpoint, flow_period, flow_periods,
    integrate, measure_order, observed_orders,
)
from .koopman import (
    EigenPair, KoopmanOperator, apply_koopman, generator_apply, nonlinear_eigenfunction_check,
    spectral_map, verify_linear_koopman,
)
from .lifting import (
    LiftedStep, LinearLiftOperators, LinearSystem, lifted_step, linear_lift_operators,
    linear_lifted_step, run_lifted,
)
from .signals import GridSpec, LiftedTrajectory, SampledSignal, eval_signal, lift, unlift

__version__ = "0.1.0"
