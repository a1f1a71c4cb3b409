from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from src.domain.entities import SolverOptions
from src.domain.errors import ConvergenceError

log = logging.getLogger(__name__)

_SQRT_EPS = float(np.sqrt(np.finfo(np.float64).eps))

Residual = Callable[[np.ndarray], np.ndarray]
Jacobian = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual: float


def forward_difference_jacobian(residual: Residual, x: np.ndarray, r0: np.ndarray | None = None) -> np.ndarray:
    """Column i = (F(x + d_i e_i) - F(x)) / d_i with d_i = sqrt(eps) * (1 + |x_i|)."""
    r0 = residual(x) if r0 is None else r0
    J = np.empty((r0.size, x.size))
    for i in range(x.size):
        d = _SQRT_EPS * (1.0 + abs(x[i]))
        xi = x.copy()
        xi[i] += d
        J[:, i] = (residual(xi) - r0) / d
    return J


def newton_solve(
    residual: Residual,
    x0: np.ndarray,
    opts: SolverOptions,
    jacobian: Jacobian | None = None,
) -> NewtonResult:
    """
    Undamped Newton iteration on a small dense system.

    Converged when ||F(x)||_inf <= opts.tol. Uses the analytic jacobian when
    given, forward differences otherwise. Errors raised by F (domain,
    degenerate denominators) propagate unchanged.
    """
    x = np.array(x0, dtype=np.float64)
    r = np.asarray(residual(x), dtype=np.float64)
    norm = float(np.max(np.abs(r)))

    for iteration in range(opts.max_iters + 1):
        if not np.isfinite(norm):
            raise ConvergenceError(f"residual became non-finite after {iteration} iterations", iteration, norm)
        if norm <= opts.tol:
            return NewtonResult(x=x, iterations=iteration, residual=norm)
        if iteration == opts.max_iters:
            break

        J = jacobian(x) if jacobian is not None else forward_difference_jacobian(residual, x, r)
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Jacobian at iteration {iteration}: {exc}", iteration, norm) from exc

        x = x + dx
        r = np.asarray(residual(x), dtype=np.float64)
        norm = float(np.max(np.abs(r)))
        log.debug("Newton iteration %d | residual=%.3e", iteration + 1, norm)

    raise ConvergenceError(
        f"no convergence after {opts.max_iters} iterations (residual {norm:.3e} > tol {opts.tol:.1e})",
        opts.max_iters,
        norm,
    )
