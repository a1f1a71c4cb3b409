from __future__ import annotations

import logging

import numpy as np

from src.domain.entities import ContactState, Trajectory, WienerPath
from src.domain.errors import ContactError, DimensionMismatchError, IntegrationError
from src.domain.interfaces import IStepper

from .noise import increments

log = logging.getLogger(__name__)


def path_increments(stepper: IStepper, path: WienerPath) -> np.ndarray:
    """
    Increment matrix (N x stepper.m) for the stepper. An m = 0 path drives any
    stepper deterministically with all-zero increments.
    """
    if path.m == 0:
        return np.zeros((path.N, stepper.m))
    if path.m != stepper.m:
        raise DimensionMismatchError(f"{stepper.scheme} stepper expects m={stepper.m}, path has m={path.m}")
    return increments(path)


def integrate(stepper: IStepper, initial: ContactState, path: WienerPath) -> Trajectory:
    """
    Fold the stepper over the path's increments.

    The first failing step ends the fold: the returned trajectory holds the
    states computed so far and an IntegrationError naming the failing index.
    """
    if initial.n != stepper.n:
        raise DimensionMismatchError(f"{stepper.scheme} stepper expects n={stepper.n}, state has n={initial.n}")
    dWs = path_increments(stepper, path)

    states = [initial]
    lambdas: list[float | None] = []
    newton_iters = 0
    max_residual = 0.0
    error: IntegrationError | None = None

    for j, dW in enumerate(dWs):
        try:
            result = stepper.step(states[-1], path.h, dW)
        except (ContactError, ArithmeticError) as exc:
            error = IntegrationError(j, exc)
            log.warning("Step %d failed | scheme=%s | %s", j, stepper.scheme, exc)
            break
        # keep the grid clock exact rather than accumulating h
        states.append(ContactState(q=result.next.q, p=result.next.p, s=result.next.s, t=initial.t + (j + 1) * path.h))
        lambdas.append(result.conformal_factor)
        newton_iters += result.newton_iters
        max_residual = max(max_residual, result.residual)

    log.debug(
        "Integrated %d/%d steps | scheme=%s | newton=%d | max_residual=%.2e",
        len(lambdas), path.N, stepper.scheme, newton_iters, max_residual,
    )
    return Trajectory(
        states=tuple(states),
        conformal_factors=tuple(lambdas),
        increments=dWs[: len(lambdas)],
        scheme=stepper.scheme,
        newton_iters=newton_iters,
        max_residual=max_residual,
        error=error,
    )
