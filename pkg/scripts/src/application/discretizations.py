"""
Discrete Lagrangians of the example systems.

All three use the forward difference v = (q_{j+1} - q_j)/h for the velocity,
the trapezoid average for the potential and a left-point noise Hamiltonian
H_1^j = H_1(q_j). None depends on p_j or p_{j+1}.
"""

from __future__ import annotations

import numpy as np

from src.domain.entities import DiscreteLagrangianData
from src.domain.errors import ModelDomainError
from src.domain.interfaces import DiscreteLagrangian

from .models import DampedMultiplicative, DampedOscillatorAdditive, KeplerDrag


def _scalar(x: np.ndarray) -> float:
    return float(np.asarray(x, dtype=np.float64).reshape(-1)[0])


def _data(
    L: float,
    dL_dq0: float,
    dL_dq1: float,
    dL_ds0: float,
    dL_ds1: float,
    H1: float,
    dH1_dq0: float,
) -> DiscreteLagrangianData:
    """Pack one-dimensional, single-noise quantities; H_1^j never depends on q_{j+1} or s."""
    return DiscreteLagrangianData(
        value_L=L,
        value_Hk=[H1],
        dL_dqj=[dL_dq0],
        dL_dqj1=[dL_dq1],
        dL_dsj=dL_ds0,
        dL_dsj1=dL_ds1,
        dHk_dqj=[[dH1_dq0]],
        dHk_dqj1=[[0.0]],
        dHk_dsj=[0.0],
        dHk_dsj1=[0.0],
    )


class AdditiveNoiseLagrangian(DiscreteLagrangian):
    """L_j = v^2/2 - (V(q_j) + V(q_{j+1}))/2 - alpha*s_j,  H_1^j = epsilon."""

    n = 1
    m = 1

    def __init__(self, model: DampedOscillatorAdditive) -> None:
        self.model = model

    def evaluate(self, q_j, q_j1, s_j, s_j1, h, t_j=0.0) -> DiscreteLagrangianData:
        q0, q1 = _scalar(q_j), _scalar(q_j1)
        params = self.model.p
        V0, dV0 = params.potential(q0)
        V1, dV1 = params.potential(q1)
        v = (q1 - q0) / h
        return _data(
            L=0.5 * v * v - 0.5 * (V0 + V1) - params.alpha * s_j,
            dL_dq0=-v / h - 0.5 * dV0,
            dL_dq1=v / h - 0.5 * dV1,
            dL_ds0=-params.alpha,
            dL_ds1=0.0,
            H1=params.epsilon,
            dH1_dq0=0.0,
        )


class MultiplicativeNoiseLagrangian(DiscreteLagrangian):
    """L_j = v^2/2 - (V(q_j) + V(q_{j+1}))/2 - alpha*(s_j^2 + s_{j+1}^2)/4,  H_1^j = sin(q_j)."""

    n = 1
    m = 1

    def __init__(self, model: DampedMultiplicative) -> None:
        self.model = model

    def evaluate(self, q_j, q_j1, s_j, s_j1, h, t_j=0.0) -> DiscreteLagrangianData:
        q0, q1 = _scalar(q_j), _scalar(q_j1)
        alpha = self.model.p.alpha
        V0, dV0 = self.model.p.potential(q0)
        V1, dV1 = self.model.p.potential(q1)
        v = (q1 - q0) / h
        return _data(
            L=0.5 * v * v - 0.5 * (V0 + V1) - 0.25 * alpha * (s_j * s_j + s_j1 * s_j1),
            dL_dq0=-v / h - 0.5 * dV0,
            dL_dq1=v / h - 0.5 * dV1,
            dL_ds0=-0.5 * alpha * s_j,
            dL_ds1=-0.5 * alpha * s_j1,
            H1=float(np.sin(q0)),
            dH1_dq0=float(np.cos(q0)),
        )


class KeplerLagrangian(DiscreteLagrangian):
    """
    L_j = v^2/2 + 2/|q_j + q_{j+1}| - beta*(s_j + s_{j+1})/2,  H_1^j = gamma*q_j.

    Both position slots must lie above q_min.
    """

    n = 1
    m = 1

    def __init__(self, model: KeplerDrag) -> None:
        self.model = model

    def evaluate(self, q_j, q_j1, s_j, s_j1, h, t_j=0.0) -> DiscreteLagrangianData:
        q0, q1 = _scalar(q_j), _scalar(q_j1)
        params = self.model.p
        for q in (q0, q1):
            if q <= params.q_min:
                raise ModelDomainError(f"kepler-drag is singular at q={q:.3e} (q_min={params.q_min:.1e})")

        total = q0 + q1
        v = (q1 - q0) / h
        # d(2/|S|)/dS = -2 sign(S)/S^2
        d_attraction = -2.0 * np.sign(total) / (total * total)
        return _data(
            L=0.5 * v * v + 2.0 / abs(total) - 0.5 * params.beta * (s_j + s_j1),
            dL_dq0=-v / h + d_attraction,
            dL_dq1=v / h + d_attraction,
            dL_ds0=-0.5 * params.beta,
            dL_ds1=-0.5 * params.beta,
            H1=params.gamma * q0,
            dH1_dq0=params.gamma,
        )
