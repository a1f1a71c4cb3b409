"""
Generic discrete stochastic Herglotz machinery.

Given a DiscreteLagrangian, one step (q_j, p_j, s_j) -> (q_{j+1}, p_{j+1}, s_{j+1})
is obtained by solving, in the unknowns (q_{j+1}, s_{j+1}),

    p_j = p_j^+ = -D^j / (1 + E^j)                         (n equations)
    s_{j+1} = s_j + h L_j - sum_k H_k^j dW_k              (1 equation)

and then reading p_{j+1} = p_{j+1}^- = D / (1 - E) from the same L_j's
second-slot partials. The conformal factor of the step is

    lambda_j = (1 + h dL/ds_j - sum dH_k/ds_j dW_k) / (1 - h dL/ds_{j+1} + sum dH_k/ds_{j+1} dW_k).

Stochastic products are plain products with the increment, as in the
displayed update formulas; no Ito correction is added anywhere.
"""

from __future__ import annotations

import logging

import numpy as np

from src.domain.contact import eval_gradients, eval_hamiltonian
from src.domain.entities import ContactState, DEQuantities, DiscreteLagrangianData, SolverOptions, StepResult
from src.domain.errors import DegenerateDenominatorError, DimensionMismatchError
from src.domain.interfaces import ContactModel, DiscreteLagrangian, IStepper

from .solver import newton_solve

log = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-12


def _noise(dW: np.ndarray, m: int) -> np.ndarray:
    dW = np.asarray(dW, dtype=np.float64).reshape(-1)
    if dW.size != m:
        raise DimensionMismatchError(f"expected {m} noise increments, got {dW.size}")
    return dW


def action_update(data: DiscreteLagrangianData, h: float, dW: np.ndarray, s_j: float) -> float:
    """s_j + h L_j - sum_k H_k^j dW_k."""
    dW = _noise(dW, data.value_Hk.size)
    return float(s_j + h * data.value_L - data.value_Hk @ dW)


def de_first_slot(data: DiscreteLagrangianData, h: float, dW: np.ndarray) -> DEQuantities:
    """D^j, E^j from the partials of L_j with respect to (q_j, s_j)."""
    dW = _noise(dW, data.value_Hk.size)
    return DEQuantities(D=h * data.dL_dqj - dW @ data.dHk_dqj, E=h * data.dL_dsj - data.dHk_dsj @ dW)


def de_second_slot(data: DiscreteLagrangianData, h: float, dW: np.ndarray) -> DEQuantities:
    """D, E from the partials of L_j with respect to (q_{j+1}, s_{j+1})."""
    dW = _noise(dW, data.value_Hk.size)
    return DEQuantities(D=h * data.dL_dqj1 - dW @ data.dHk_dqj1, E=h * data.dL_dsj1 - data.dHk_dsj1 @ dW)


def compute_DE_minus(
    Ld: DiscreteLagrangian,
    q_prev: np.ndarray,
    q_j: np.ndarray,
    s_prev: float,
    s_j: float,
    h: float,
    dW_prev: np.ndarray,
    t_prev: float = 0.0,
) -> DEQuantities:
    """D^{j-1}, E^{j-1}: partials of L_{j-1} with respect to its second slot (q_j, s_j)."""
    return de_second_slot(Ld.evaluate(q_prev, q_j, s_prev, s_j, h, t_prev), h, dW_prev)


def compute_DE_plus(
    Ld: DiscreteLagrangian,
    q_j: np.ndarray,
    q_next: np.ndarray,
    s_j: float,
    s_next: float,
    h: float,
    dW_j: np.ndarray,
    t_j: float = 0.0,
) -> DEQuantities:
    """D^j, E^j: partials of L_j with respect to its first slot (q_j, s_j)."""
    return de_first_slot(Ld.evaluate(q_j, q_next, s_j, s_next, h, t_j), h, dW_j)


def momentum_minus(de: DEQuantities) -> np.ndarray:
    denominator = 1.0 - de.E
    if abs(denominator) < DENOMINATOR_FLOOR:
        raise DegenerateDenominatorError(f"1 - E = {denominator:.3e}; step too large for the dissipation rate")
    return de.D / denominator


def momentum_plus(de: DEQuantities) -> np.ndarray:
    denominator = 1.0 + de.E
    if abs(denominator) < DENOMINATOR_FLOOR:
        raise DegenerateDenominatorError(f"1 + E = {denominator:.3e}; step too large for the dissipation rate")
    return -de.D / denominator


def conformal_factor(data: DiscreteLagrangianData, h: float, dW: np.ndarray) -> float:
    dW = _noise(dW, data.value_Hk.size)
    numerator = 1.0 + h * data.dL_dsj - data.dHk_dsj @ dW
    denominator = 1.0 - h * data.dL_dsj1 + data.dHk_dsj1 @ dW
    if abs(denominator) < DENOMINATOR_FLOOR:
        raise DegenerateDenominatorError(f"conformal-factor denominator {denominator:.3e}")
    return float(numerator / denominator)


def conformal_exponent(data: DiscreteLagrangianData, h: float, dW: np.ndarray) -> float:
    """h (dL/ds_j + dL/ds_{j+1}) - sum_k (dH_k/ds_j + dH_k/ds_{j+1}) dW_k."""
    dW = _noise(dW, data.value_Hk.size)
    return float(h * (data.dL_dsj + data.dL_dsj1) - (data.dHk_dsj + data.dHk_dsj1) @ dW)


def _require_positive_step(h: float) -> None:
    if not h > 0.0:
        raise ValueError(f"variational steps need h > 0, got {h}")


def step_contact(
    Ld: DiscreteLagrangian,
    state: ContactState,
    h: float,
    dW: np.ndarray,
    opts: SolverOptions = SolverOptions(),
) -> StepResult:
    _require_positive_step(h)
    if state.n != Ld.n:
        raise DimensionMismatchError(f"state has n={state.n}, discretization expects n={Ld.n}")
    dW = _noise(dW, Ld.m)
    n = Ld.n
    q_j, p_j, s_j, t_j = state.q, state.p, state.s, state.t

    def residual(x: np.ndarray) -> np.ndarray:
        q_next, s_next = x[:n], x[n]
        data = Ld.evaluate(q_j, q_next, s_j, s_next, h, t_j)
        matching = p_j - momentum_plus(de_first_slot(data, h, dW))
        action = s_next - action_update(data, h, dW, s_j)
        return np.concatenate([matching, [action]])

    # explicit Euler predictor
    guess = np.concatenate([q_j + h * p_j, [s_j + h * Ld.model.lagrangian(q_j, p_j, s_j, t_j)]])
    solved = newton_solve(residual, guess, opts)

    q_next, s_next = solved.x[:n], float(solved.x[n])
    data = Ld.evaluate(q_j, q_next, s_j, s_next, h, t_j)
    p_next = momentum_minus(de_second_slot(data, h, dW))
    return StepResult(
        next=ContactState(q=q_next, p=p_next, s=s_next, t=t_j + h),
        conformal_factor=conformal_factor(data, h, dW),
        newton_iters=solved.iterations,
        residual=solved.residual,
    )


def contact_drift_and_diffusion(model: ContactModel, state: ContactState) -> tuple[np.ndarray, np.ndarray]:
    """
    Right-hand sides of the canonical contact system in (q, p, s) layout:
    drift f (length 2n+1) and diffusion G ((2n+1) x m), one column per H_k.
    """
    def field(k: int) -> np.ndarray:
        g = eval_gradients(model, k, state)
        H = eval_hamiltonian(model, k, state)
        return np.concatenate([g.dp, -(g.dq + state.p * g.ds), [state.p @ g.dp - H]])

    f = field(0)
    G = np.column_stack([field(k) for k in range(1, model.m + 1)]) if model.m else np.zeros((f.size, 0))
    return f, G


def step_euler_maruyama(model: ContactModel, state: ContactState, h: float, dW: np.ndarray) -> ContactState:
    dW = _noise(dW, model.m)
    f, G = contact_drift_and_diffusion(model, state)
    x = state.as_vector() + h * f + G @ dW
    return ContactState.from_vector(x, t=state.t + h)


class VariationalContactStepper(IStepper):
    """
    Contact stepper built from any DiscreteLagrangian through step_contact.
    Receives its discretization and solver options; it builds neither.
    """

    scheme = "contact"

    def __init__(self, discretization: DiscreteLagrangian, opts: SolverOptions = SolverOptions()) -> None:
        self.discretization = discretization
        self.opts = opts
        self.n = discretization.n
        self.m = discretization.m

    def step(self, state: ContactState, h: float, dW: np.ndarray) -> StepResult:
        return step_contact(self.discretization, state, h, dW, self.opts)


class EulerMaruyamaStepper(IStepper):
    """Explicit Euler step of the canonical contact SDE; records no conformal factor."""

    scheme = "em"

    def __init__(self, model: ContactModel) -> None:
        self.model = model
        self.n = model.n
        self.m = model.m

    def step(self, state: ContactState, h: float, dW: np.ndarray) -> StepResult:
        return StepResult(next=step_euler_maruyama(self.model, state, h, dW), conformal_factor=None)
