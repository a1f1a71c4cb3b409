"""
Closed-form one-step maps of the example systems.

The contact schemes are the explicit or reduced forms of the generic Herglotz
step for the discrete Lagrangians in discretizations.py; the Euler-Maruyama
schemes are written out as the baselines they are compared against. All maps
take (q_j, p_j, s_j) to (q_{j+1}, p_{j+1}, s_{j+1}) for a scalar increment dW.
"""

from __future__ import annotations

import logging
from collections.abc import Callable

import numpy as np

from src.domain.entities import ContactState, SolverOptions, StepResult
from src.domain.errors import ConvergenceError, DegenerateDenominatorError, DimensionMismatchError, ModelDomainError
from src.domain.interfaces import IStepper

from .models import Model1Params, Model2Params, Model3Params
from .solver import newton_solve

log = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-12


def _increment(dW) -> float:
    dW = np.asarray(dW, dtype=np.float64).reshape(-1)
    if dW.size != 1:
        raise DimensionMismatchError(f"the example systems take one noise increment, got {dW.size}")
    return float(dW[0])


def _unpack(state: ContactState) -> tuple[float, float, float]:
    if state.n != 1:
        raise DimensionMismatchError(f"the example systems are one-dimensional, got n={state.n}")
    return float(state.q[0]), float(state.p[0]), state.s


def _state(q: float, p: float, s: float, t: float) -> ContactState:
    return ContactState(q=[q], p=[p], s=s, t=t)


# ---------------------------------------------------------------------------
# damped-oscillator-additive
# ---------------------------------------------------------------------------

def model1_contact_step(params: Model1Params, state: ContactState, h: float, dW) -> StepResult:
    q0, p0, s0 = _unpack(state)
    dW = _increment(dW)
    a = 1.0 - h * params.alpha
    V0, dV0 = params.potential(q0)

    q1 = q0 + h * a * p0 - 0.5 * h * h * dV0
    V1, dV1 = params.potential(q1)
    p1 = a * p0 - 0.5 * h * (dV0 + dV1)
    s1 = s0 + (q1 - q0) ** 2 / (2.0 * h) - 0.5 * h * (V1 + V0) - params.alpha * h * s0 - params.epsilon * dW
    return StepResult(next=_state(q1, p1, s1, state.t + h), conformal_factor=a)


def model1_step_jacobian(params: Model1Params, state: ContactState, h: float, dW=0.0) -> np.ndarray:
    """
    Exact derivative of model1_contact_step in (q, p, s) layout. The noise
    enters additively, so dW does not appear.
    """
    q0, p0, _ = _unpack(state)
    a = 1.0 - h * params.alpha
    _, dV0 = params.potential(q0)
    q1 = q0 + h * a * p0 - 0.5 * h * h * dV0
    _, dV1 = params.potential(q1)
    ddV0 = params.potential.curvature(q0)
    ddV1 = params.potential.curvature(q1)

    dq1_dq0 = 1.0 - 0.5 * h * h * ddV0
    dq1_dp0 = h * a
    v = (q1 - q0) / h
    return np.array([
        [dq1_dq0, dq1_dp0, 0.0],
        [-0.5 * h * (ddV0 + ddV1 * dq1_dq0), a - 0.5 * h * ddV1 * dq1_dp0, 0.0],
        [
            v * (dq1_dq0 - 1.0) - 0.5 * h * (dV1 * dq1_dq0 + dV0),
            v * dq1_dp0 - 0.5 * h * dV1 * dq1_dp0,
            1.0 - params.alpha * h,
        ],
    ])


def model1_em_step(params: Model1Params, state: ContactState, h: float, dW) -> ContactState:
    q, p, s = _unpack(state)
    dW = _increment(dW)
    V, dV = params.potential(q)
    return _state(
        q + h * p,
        p - h * (dV + params.alpha * p),
        s + h * (0.5 * p * p - V - params.alpha * s) - params.epsilon * dW,
        state.t + h,
    )


# ---------------------------------------------------------------------------
# damped-multiplicative
# ---------------------------------------------------------------------------

def model2_contact_step(params: Model2Params, state: ContactState, h: float, dW) -> StepResult:
    """
    q_{j+1} is explicit. s_{j+1} solves (alpha h/4) s^2 + s - c = 0; the root
    2c / (1 + sqrt(1 + alpha h c)) is the one tending to c as alpha*h -> 0.
    p_{j+1} then follows explicitly.
    """
    q0, p0, s0 = _unpack(state)
    dW = _increment(dW)
    alpha = params.alpha
    a = 1.0 - 0.5 * h * alpha * s0
    V0, dV0 = params.potential(q0)
    cos0, sin0 = float(np.cos(q0)), float(np.sin(q0))

    q1 = q0 + h * a * p0 - h * cos0 * dW - 0.5 * h * h * dV0
    V1, dV1 = params.potential(q1)

    c = s0 + (q1 - q0) ** 2 / (2.0 * h) - 0.5 * h * (V1 + V0) - 0.25 * alpha * h * s0 * s0 - sin0 * dW
    discriminant = 1.0 + alpha * h * c
    if discriminant < 0.0:
        raise ConvergenceError(f"action update has no real root (discriminant {discriminant:.3e}); reduce h")
    s1 = 2.0 * c / (1.0 + np.sqrt(discriminant))

    denominator = 1.0 + 0.5 * h * alpha * s1
    if abs(denominator) < DENOMINATOR_FLOOR:
        raise DegenerateDenominatorError(f"1 + h*alpha*s/2 = {denominator:.3e}")
    p1 = (a * p0 - cos0 * dW - 0.5 * h * (dV1 + dV0)) / denominator
    return StepResult(next=_state(q1, p1, float(s1), state.t + h), conformal_factor=a / denominator)


def model2_scheme_residuals(
    params: Model2Params, prev: ContactState, nxt: ContactState, h: float, dW
) -> np.ndarray:
    """The three update equations of the multiplicative contact scheme, moved to one side."""
    q0, p0, s0 = _unpack(prev)
    q1, p1, s1 = _unpack(nxt)
    dW = _increment(dW)
    alpha = params.alpha
    a = 1.0 - 0.5 * h * alpha * s0
    V0, dV0 = params.potential(q0)
    V1, dV1 = params.potential(q1)
    return np.array([
        q1 - (q0 + h * a * p0 - h * np.cos(q0) * dW - 0.5 * h * h * dV0),
        (1.0 + 0.5 * h * alpha * s1) * p1 - (a * p0 - np.cos(q0) * dW - 0.5 * h * (dV1 + dV0)),
        s1 - (s0 + (q1 - q0) ** 2 / (2.0 * h) - 0.5 * h * (V1 + V0)
              - 0.25 * alpha * h * (s0 * s0 + s1 * s1) - np.sin(q0) * dW),
    ])


def model2_em_step(params: Model2Params, state: ContactState, h: float, dW) -> ContactState:
    # the momentum update uses (q_{j+1} - q_j)/h, which equals p_j here
    q, p, s = _unpack(state)
    dW = _increment(dW)
    V, dV = params.potential(q)
    return _state(
        q + h * p,
        p - h * (dV + params.alpha * s * p) - np.cos(q) * dW,
        s + h * (0.5 * p * p - V - 0.5 * params.alpha * s * s) - np.sin(q) * dW,
        state.t + h,
    )


# ---------------------------------------------------------------------------
# kepler-drag
# ---------------------------------------------------------------------------

def _kepler_guard(params: Model3Params, q: float) -> None:
    if q <= params.q_min:
        raise ModelDomainError(f"kepler-drag is singular at q={q:.3e} (q_min={params.q_min:.1e})")


def model3_contact_step(
    params: Model3Params,
    state: ContactState,
    h: float,
    dW,
    opts: SolverOptions = SolverOptions(),
) -> StepResult:
    """
    (q_{j+1}, p_{j+1}) from a two-dimensional Newton solve with analytic
    Jacobian, then s_{j+1} from its linear equation. Residuals are in
    momentum units.
    """
    q0, p0, s0 = _unpack(state)
    dW = _increment(dW)
    _kepler_guard(params, q0)
    b = 0.5 * params.beta * h
    gamma = params.gamma

    def residual(x: np.ndarray) -> np.ndarray:
        q1, p1 = x
        _kepler_guard(params, q1)
        v = (q1 - q0) / h
        total = q1 + q0
        return np.array([
            v - 0.5 * ((1.0 + b) * p1 + (1.0 - b) * p0 - gamma * dW),
            (1.0 + b) * p1 - v + 2.0 * h / (total * total),
        ])

    def jacobian(x: np.ndarray) -> np.ndarray:
        total = x[0] + q0
        return np.array([
            [1.0 / h, -0.5 * (1.0 + b)],
            [-1.0 / h - 4.0 * h / total ** 3, 1.0 + b],
        ])

    solved = newton_solve(residual, np.array([q0 + h * p0, p0]), opts, jacobian=jacobian)
    q1, p1 = (float(x) for x in solved.x)
    total = q1 + q0
    s1 = (s0 * (1.0 - b) + (q1 - q0) ** 2 / (2.0 * h) + 2.0 * h / total - gamma * q0 * dW) / (1.0 + b)
    return StepResult(
        next=_state(q1, p1, s1, state.t + h),
        conformal_factor=(1.0 - b) / (1.0 + b),
        newton_iters=solved.iterations,
        residual=solved.residual,
    )


def model3_scheme_residuals(
    params: Model3Params, prev: ContactState, nxt: ContactState, h: float, dW
) -> np.ndarray:
    """Back-substitution of a step into the kepler-drag contact scheme's three equations."""
    q0, p0, s0 = _unpack(prev)
    q1, p1, s1 = _unpack(nxt)
    dW = _increment(dW)
    b = 0.5 * params.beta * h
    v = (q1 - q0) / h
    total = abs(q1 + q0)
    return np.array([
        v - 0.5 * ((1.0 + b) * p1 + (1.0 - b) * p0 - params.gamma * dW),
        (1.0 + b) * p1 - v + 2.0 * h / total ** 2,
        (1.0 + b) * s1 - (s0 * (1.0 - b) + (q1 - q0) ** 2 / (2.0 * h) + 2.0 * h / total - params.gamma * q0 * dW),
    ])


def model3_em_step(params: Model3Params, state: ContactState, h: float, dW) -> ContactState:
    q, p, s = _unpack(state)
    dW = _increment(dW)
    _kepler_guard(params, q)
    return _state(
        q + h * p,
        p - h * (1.0 / (q * q) + params.beta * p) - params.gamma * dW,
        s + h * (0.5 * p * p + 1.0 / q - params.beta * s) - params.gamma * q * dW,
        state.t + h,
    )


# ---------------------------------------------------------------------------
# Stepper adapter
# ---------------------------------------------------------------------------

StepFn = Callable[[ContactState, float, np.ndarray], "StepResult | ContactState"]
JacobianFn = Callable[[ContactState, float, np.ndarray], np.ndarray]


class SchemeStepper(IStepper):
    """
    Wraps one closed-form map (parameters already bound) as an IStepper.
    EM maps return bare states; they are recorded without a conformal factor.
    """

    n = 1
    m = 1

    def __init__(self, scheme: str, step: StepFn, jacobian: JacobianFn | None = None) -> None:
        self.scheme = scheme
        self._step = step
        self._jacobian = jacobian

    @property
    def has_analytic_jacobian(self) -> bool:
        return self._jacobian is not None

    def jacobian(self, state: ContactState, h: float, dW: np.ndarray) -> np.ndarray:
        if self._jacobian is None:
            raise NotImplementedError(f"no analytic Jacobian for the {self.scheme} scheme")
        return self._jacobian(state, h, dW)

    def step(self, state: ContactState, h: float, dW: np.ndarray) -> StepResult:
        out = self._step(state, h, dW)
        if isinstance(out, StepResult):
            return out
        return StepResult(next=out, conformal_factor=None)
