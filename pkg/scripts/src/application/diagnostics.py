"""
Structural diagnostics for trajectories.

    step_jacobian          derivative of a one-step map at a fixed increment
    contact_residuals      pullback of eta through that derivative, per step
    conformal_compare      recorded lambda_j against continuous / discrete references
    criticality_residual   |ds_N/dq_j| along a q-path at fixed noise
    self_convergence       strong error against the finest dyadic refinement
    ensemble_norms         sample root-mean-square norms of a state ensemble

Contact preservation is measured through the one-step linearization: the map
is a contact scheme when J^T eta(x_{j+1}) = lambda_j eta(x_j) holds at every step.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from src.domain.contact import contact_form_at, eval_gradients
from src.domain.entities import (
    ContactReport,
    ContactState,
    ConformalComparison,
    ConvergenceTable,
    EnsembleStats,
    SolverOptions,
    StepJacobian,
    Trajectory,
)
from src.domain.errors import ConfigError, ContactError, DimensionMismatchError, InvalidStateError
from src.domain.interfaces import ContactModel, DiscreteLagrangian, IStepper, Potential

from .herglotz import action_update, conformal_exponent, conformal_factor
from .integrator import integrate
from .noise import deterministic_path, generate_path, refine_to
from .solver import newton_solve

log = logging.getLogger(__name__)

DEFAULT_FD_SCALE = 1e-6


# ---------------------------------------------------------------------------
# Step Jacobians and the contact identity
# ---------------------------------------------------------------------------

def _fd_steps(x: np.ndarray, fd_step: float | None) -> np.ndarray:
    if fd_step is not None:
        return np.full(x.size, float(fd_step))
    return DEFAULT_FD_SCALE * (1.0 + np.abs(x))


def step_jacobian(
    stepper: IStepper,
    state: ContactState,
    h: float,
    dW: np.ndarray,
    fd_step: float | None = None,
    method: str = "finite-difference",
) -> StepJacobian:
    """
    Central differences column by column, re-running the step with the same
    dW for every perturbation. method="analytic" asks the stepper for its
    exact derivative instead.
    """
    if method == "analytic":
        if not getattr(stepper, "has_analytic_jacobian", False):
            raise ConfigError(f"the {stepper.scheme} stepper has no analytic Jacobian")
        return StepJacobian(J=np.asarray(stepper.jacobian(state, h, dW), dtype=np.float64), method="analytic")
    if method != "finite-difference":
        raise ConfigError(f"unknown Jacobian method {method!r}")

    x = state.as_vector()
    steps = _fd_steps(x, fd_step)
    J = np.empty((x.size, x.size))
    for i, d in enumerate(steps):
        images = []
        for sign in (1.0, -1.0):
            xi = x.copy()
            xi[i] += sign * d
            try:
                images.append(stepper.step(ContactState.from_vector(xi, t=state.t), h, dW).next.as_vector())
            except ContactError:
                log.error("Jacobian perturbation failed | coordinate=%d | offset=%+.3e", i, sign * d)
                raise
        J[:, i] = (images[0] - images[1]) / (2.0 * d)
    return StepJacobian(J=J, method="finite-difference", fd_step=fd_step)


def pullback_residual(J: np.ndarray, before: ContactState, after: ContactState, lam: float | None) -> tuple[float, float]:
    """
    (r, lambda) with r = ||J^T eta(after) - lambda eta(before)||_inf. Without a
    recorded lambda the s-component ratio of the pullback is used.
    """
    pulled = J.T @ contact_form_at(after).coeffs
    eta = contact_form_at(before).coeffs
    if lam is None:
        lam = float(pulled[-1])
    return float(np.max(np.abs(pulled - lam * eta))), lam


def contact_residuals(
    stepper: IStepper,
    trajectory: Trajectory,
    h: float,
    fd_step: float | None = None,
    method: str = "finite-difference",
    model: ContactModel | None = None,
) -> ContactReport:
    residuals, lambdas = [], []
    for j in range(trajectory.steps):
        before, after = trajectory.states[j], trajectory.states[j + 1]
        dW = trajectory.increments[j]
        jac = step_jacobian(stepper, before, h, dW, fd_step=fd_step, method=method)
        r, lam = pullback_residual(jac.J, before, after, trajectory.conformal_factors[j])
        residuals.append(r)
        lambdas.append(lam)

    reference = (
        continuous_reference(model, trajectory, h) if model is not None else np.full(trajectory.steps, np.nan)
    )
    report = ContactReport(residuals=np.array(residuals), lambdas=np.array(lambdas), lambda_ref=reference)
    log.info(
        "Contact residuals | scheme=%s | steps=%d | max=%.3e | mean=%.3e",
        trajectory.scheme, trajectory.steps, report.max_residual, report.mean_residual,
    )
    return report


# ---------------------------------------------------------------------------
# Conformal factors
# ---------------------------------------------------------------------------

def recomputed_conformal_factors(Ld: DiscreteLagrangian, trajectory: Trajectory, h: float) -> np.ndarray:
    """Conformal factors re-evaluated from the stored states and increments."""
    out = np.empty(trajectory.steps)
    for j in range(trajectory.steps):
        a, b = trajectory.states[j], trajectory.states[j + 1]
        data = Ld.evaluate(a.q, b.q, a.s, b.s, h, a.t)
        out[j] = conformal_factor(data, h, trajectory.increments[j])
    return out


def continuous_reference(model: ContactModel, trajectory: Trajectory, h: float) -> np.ndarray:
    """
    exp of the trapezoid rule for int dL/ds dt - sum_k int dH_k/ds o dW_k over
    each step, with dL/ds = -dH_0/ds along the Legendre relation.
    """
    def s_partials(state: ContactState) -> np.ndarray:
        return np.array([eval_gradients(model, k, state).ds for k in range(model.m + 1)])

    partials = np.array([s_partials(x) for x in trajectory.states])
    mid = 0.5 * (partials[:-1] + partials[1:])
    exponent = -h * mid[:, 0]
    if model.m:
        exponent -= np.sum(mid[:, 1:] * trajectory.increments, axis=1)
    return np.exp(exponent)


def discrete_reference(Ld: DiscreteLagrangian, trajectory: Trajectory, h: float) -> np.ndarray:
    """exp(h (dL/ds_j + dL/ds_{j+1}) - sum_k (dH_k/ds_j + dH_k/ds_{j+1}) dW_k) per step."""
    out = np.empty(trajectory.steps)
    for j in range(trajectory.steps):
        a, b = trajectory.states[j], trajectory.states[j + 1]
        data = Ld.evaluate(a.q, b.q, a.s, b.s, h, a.t)
        out[j] = np.exp(conformal_exponent(data, h, trajectory.increments[j]))
    return out


def conformal_compare(
    trajectory: Trajectory,
    model: ContactModel,
    h: float,
    mode: str = "continuous",
    discretization: DiscreteLagrangian | None = None,
) -> ConformalComparison:
    if mode == "continuous":
        reference = continuous_reference(model, trajectory, h)
    elif mode == "discrete":
        if discretization is None:
            raise ConfigError("the discrete reference needs the discrete Lagrangian")
        reference = discrete_reference(discretization, trajectory, h)
    else:
        raise ConfigError(f"unknown conformal reference mode {mode!r}; expected continuous or discrete")

    nominal = np.full(trajectory.steps, np.exp(-model.nominal_conformal_rate() * h))
    return ConformalComparison(lambdas=trajectory.lambdas, reference=reference, nominal=nominal, mode=mode)


# ---------------------------------------------------------------------------
# Discrete action and criticality
# ---------------------------------------------------------------------------

def _advance_action(
    Ld: DiscreteLagrangian,
    q_j: np.ndarray,
    q_next: np.ndarray,
    s_j: float,
    h: float,
    dW: np.ndarray,
    t_j: float,
    opts: SolverOptions,
) -> float:
    """s_{j+1} from the action recursion; a scalar Newton solve when L_j depends on s_{j+1}."""
    def residual(x: np.ndarray) -> np.ndarray:
        data = Ld.evaluate(q_j, q_next, s_j, x[0], h, t_j)
        return np.array([x[0] - action_update(data, h, dW, s_j)])

    # exact at iteration 0 when L_j ignores s_{j+1}
    guess = action_update(Ld.evaluate(q_j, q_next, s_j, s_j, h, t_j), h, dW, s_j)
    return float(newton_solve(residual, np.array([guess]), opts).x[0])


def discrete_action(
    Ld: DiscreteLagrangian,
    q_path: np.ndarray,
    s0: float,
    increments: np.ndarray,
    h: float,
    t0: float = 0.0,
    opts: SolverOptions = SolverOptions(),
) -> np.ndarray:
    """s_0..s_N generated by the action recursion along a fixed q-path (shape (N+1, n))."""
    q_path = np.asarray(q_path, dtype=np.float64).reshape(len(q_path), -1)
    s = np.empty(len(q_path))
    s[0] = s0
    for j in range(len(q_path) - 1):
        s[j + 1] = _advance_action(Ld, q_path[j], q_path[j + 1], s[j], h, increments[j], t0 + j * h, opts)
    return s


def criticality_residual(
    Ld: DiscreteLagrangian,
    trajectory: Trajectory,
    h: float,
    j: int,
    fd_step: float = DEFAULT_FD_SCALE,
    opts: SolverOptions = SolverOptions(),
) -> float:
    """
    |ds_N/dq_j| by central differences: q_j is moved by +-fd_step (every
    component), the endpoints and noise stay fixed and the recursion is re-run
    from step j-1.
    """
    if not Ld.momentum_independent:
        raise ConfigError("criticality needs a discrete Lagrangian that does not depend on momenta")
    N = trajectory.steps
    if not 1 <= j <= N - 1:
        raise IndexError(f"interior index must lie in 1..{N - 1}, got {j}")

    q = trajectory.q
    start = j - 1
    ends = []
    for sign in (1.0, -1.0):
        path = q.copy()
        path[j] += sign * fd_step
        s = discrete_action(
            Ld,
            path[start:],
            trajectory.states[start].s,
            trajectory.increments[start:],
            h,
            t0=trajectory.states[start].t,
            opts=opts,
        )
        ends.append(s[-1])
    return float(abs(ends[0] - ends[1]) / (2.0 * fd_step))


def criticality_profile(
    Ld: DiscreteLagrangian, trajectory: Trajectory, h: float, fd_step: float = DEFAULT_FD_SCALE
) -> np.ndarray:
    """criticality_residual at every interior index 1..N-1."""
    return np.array([criticality_residual(Ld, trajectory, h, j, fd_step) for j in range(1, trajectory.steps)])


# ---------------------------------------------------------------------------
# Self-convergence
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConvergenceSample:
    """Terminal states of one seed at every level, coarsest first; None if a level failed."""
    seed: int
    terminals: tuple[np.ndarray, ...] | None
    error: Exception | None = None


def convergence_sample(
    stepper: IStepper,
    initial: ContactState,
    seed: int,
    h0: float,
    N0: int,
    levels: int,
    m: int | None = None,
) -> ConvergenceSample:
    """Integrate one shared noise realization at h0, h0/2, ..., h0/2**(levels-1)."""
    m = stepper.m if m is None else m
    base = generate_path(seed, m, N0, h0) if m else deterministic_path(N0, h0)
    terminals = []
    for level in range(levels):
        path = refine_to(base, level) if m else deterministic_path(N0 * 2 ** level, h0 / 2 ** level)
        trajectory = integrate(stepper, initial, path)
        if not trajectory.is_complete:
            log.warning("Seed %d excluded | level=%d | %s", seed, level, trajectory.error)
            return ConvergenceSample(seed=seed, terminals=None, error=trajectory.error)
        terminals.append(trajectory.states[-1].as_vector())
    return ConvergenceSample(seed=seed, terminals=tuple(terminals))


def summarize_convergence(samples: Sequence[ConvergenceSample], h0: float, levels: int) -> ConvergenceTable:
    """
    Root-mean-square terminal difference to the finest level, averaged over the
    seeds that completed every level, with the log-log slope of the nonzero rows.
    """
    h = h0 / 2.0 ** np.arange(levels)
    good = [s.terminals for s in samples if s.terminals is not None]
    failures = len(samples) - len(good)
    if not good:
        return ConvergenceTable(h=h, strong_error=np.full(levels, np.nan), samples=0, failures=failures, slope=np.nan)

    terminals = np.array(good)                          # (seeds, levels, 2n+1)
    diff = terminals - terminals[:, -1:, :]
    strong_error = np.sqrt(np.mean(np.sum(diff ** 2, axis=2), axis=0))

    fit = strong_error > 0.0
    slope = float(np.polyfit(np.log(h[fit]), np.log(strong_error[fit]), 1)[0]) if np.count_nonzero(fit) >= 2 else np.nan
    return ConvergenceTable(h=h, strong_error=strong_error, samples=len(good), failures=failures, slope=slope)


def self_convergence(
    stepper: IStepper,
    initial: ContactState,
    base_seed: int,
    h0: float,
    N0: int,
    levels: int,
    n_paths: int,
    m: int | None = None,
) -> ConvergenceTable:
    """Sequential harness over seeds base_seed .. base_seed + n_paths - 1."""
    if levels < 1:
        raise ConfigError(f"levels must be >= 1, got {levels}")
    if n_paths < 1:
        raise ConfigError(f"need at least one path, got {n_paths}")
    samples = [convergence_sample(stepper, initial, base_seed + i, h0, N0, levels, m) for i in range(n_paths)]
    table = summarize_convergence(samples, h0, levels)
    log.info("Self-convergence | samples=%d | failures=%d | slope=%.3f", table.samples, table.failures, table.slope)
    return table


# ---------------------------------------------------------------------------
# Ensemble norms and energies
# ---------------------------------------------------------------------------

def ensemble_norms(states: Sequence[ContactState]) -> EnsembleStats:
    """sqrt(mean_i |x_i|^2) for the whole state and for each block."""
    if not states:
        raise InvalidStateError("ensemble_norms needs at least one state")
    n = states[0].n
    if any(x.n != n for x in states):
        raise DimensionMismatchError("ensemble states differ in dimension")

    X = np.array([x.as_vector() for x in states])

    def rms(block: np.ndarray) -> float:
        return float(np.sqrt(np.mean(np.sum(block ** 2, axis=1))))

    return EnsembleStats(
        sample_count=len(states),
        norm=rms(X),
        q_norm=rms(X[:, :n]),
        p_norm=rms(X[:, n:2 * n]),
        s_norm=rms(X[:, 2 * n:]),
    )


def ensemble_norm_series(trajectories: Sequence[Trajectory]) -> list[EnsembleStats]:
    """ensemble_norms at every time index shared by all trajectories."""
    if not trajectories:
        raise InvalidStateError("ensemble_norm_series needs at least one trajectory")
    length = min(len(t.states) for t in trajectories)
    return [ensemble_norms([t.states[i] for t in trajectories]) for i in range(length)]


def ensemble_operator_norm(matrices: Sequence[np.ndarray]) -> float:
    """sqrt(E |G|^2) with |.| the spectral (operator 2-) norm, estimated by the sample mean."""
    if not matrices:
        raise InvalidStateError("ensemble_operator_norm needs at least one matrix")
    return float(np.sqrt(np.mean([scipy.linalg.norm(G, 2) ** 2 for G in matrices])))


def mechanical_energy(trajectory: Trajectory, potential: Potential) -> np.ndarray:
    """|p|^2/2 + V(q) along a one-dimensional trajectory."""
    return np.array([0.5 * float(x.p @ x.p) + potential(float(x.q[0]))[0] for x in trajectory.states])


def modified_energy(trajectory: Trajectory, h: float, stiffness: float = 1.0) -> np.ndarray:
    """
    p^2/2 + (1 - k h^2/4) k q^2/2: the quadratic form the undamped, noise-free
    additive scheme preserves exactly for V = k q^2/2.
    """
    factor = 1.0 - stiffness * h * h / 4.0
    return np.array([0.5 * float(x.p @ x.p) + 0.5 * factor * stiffness * float(x.q @ x.q) for x in trajectory.states])
