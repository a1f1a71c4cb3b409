"""
The three one-dimensional example systems.

    damped-oscillator-additive   H0 = p^2/2 + V(q) + alpha*s,      H1 = epsilon
    damped-multiplicative        H0 = p^2/2 + V(q) + alpha*s^2/2,  H1 = sin(q)
    kepler-drag                  H0 = p^2/2 - 1/q + beta*s,        H1 = gamma*q   (q > q_min)

Each Lagrangian is the Legendre transform L = p*qdot - H0 evaluated at p = qdot.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from src.domain.entities import ContactState, HamiltonianGradient
from src.domain.errors import ConfigError, ModelDomainError
from src.domain.interfaces import ContactModel, Potential

log = logging.getLogger(__name__)

DEFAULT_Q_MIN = 1e-8


@dataclass(frozen=True)
class QuadraticPotential(Potential):
    """V(q) = k q^2 / 2."""
    stiffness: float = 1.0

    def __call__(self, q: float) -> tuple[float, float]:
        return 0.5 * self.stiffness * q * q, self.stiffness * q

    def curvature(self, q: float) -> float:
        return self.stiffness


def _non_negative(name: str, value: float) -> None:
    if not np.isfinite(value) or value < 0.0:
        raise ConfigError(f"{name} must be a finite value >= 0, got {value}")


def _finite(name: str, value: float) -> None:
    if not np.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value}")


@dataclass(frozen=True)
class Model1Params:
    alpha: float = 0.1
    epsilon: float = 0.02
    potential: Potential = field(default_factory=QuadraticPotential)

    def __post_init__(self) -> None:
        _non_negative("alpha", self.alpha)
        _finite("epsilon", self.epsilon)


@dataclass(frozen=True)
class Model2Params:
    alpha: float = 0.1
    potential: Potential = field(default_factory=QuadraticPotential)

    def __post_init__(self) -> None:
        _non_negative("alpha", self.alpha)


@dataclass(frozen=True)
class Model3Params:
    beta: float = 0.01
    gamma: float = 0.1
    q_min: float = DEFAULT_Q_MIN

    def __post_init__(self) -> None:
        _non_negative("beta", self.beta)
        _finite("gamma", self.gamma)
        if not self.q_min > 0.0:
            raise ConfigError(f"q_min must be > 0, got {self.q_min}")


def _scalar(x: np.ndarray) -> float:
    return float(np.asarray(x).reshape(-1)[0])


def _gradient(dq: float, dp: float, ds: float) -> HamiltonianGradient:
    return HamiltonianGradient(dq=[dq], dp=[dp], ds=ds)


class _OneDimensionalModel(ContactModel):
    n = 1
    m = 1

    def _check_noise_index(self, k: int) -> None:
        if not 0 <= k <= self.m:
            raise IndexError(f"Hamiltonian index {k} outside 0..{self.m}")


class DampedOscillatorAdditive(_OneDimensionalModel):
    """Damped mechanical system driven by additive noise on the action."""

    def __init__(self, params: Model1Params = Model1Params()) -> None:
        self.p = params

    @property
    def params(self) -> Mapping[str, float]:
        return {"alpha": self.p.alpha, "epsilon": self.p.epsilon}

    def hamiltonian(self, k: int, state: ContactState) -> float:
        self._check_noise_index(k)
        if k == 1:
            return self.p.epsilon
        q, p = _scalar(state.q), _scalar(state.p)
        V, _ = self.p.potential(q)
        return 0.5 * p * p + V + self.p.alpha * state.s

    def gradient(self, k: int, state: ContactState) -> HamiltonianGradient:
        self._check_noise_index(k)
        if k == 1:
            return _gradient(0.0, 0.0, 0.0)
        _, dV = self.p.potential(_scalar(state.q))
        return _gradient(dV, _scalar(state.p), self.p.alpha)

    def lagrangian(self, q: np.ndarray, qdot: np.ndarray, s: float, t: float = 0.0) -> float:
        v = _scalar(qdot)
        V, _ = self.p.potential(_scalar(q))
        return 0.5 * v * v - V - self.p.alpha * s

    def nominal_conformal_rate(self) -> float:
        return self.p.alpha


class DampedMultiplicative(_OneDimensionalModel):
    """
    Damping quadratic in the action, noise sin(q) entering the momentum.

    Its conformal rate is alpha*s, state dependent; nominal_conformal_rate
    still reports alpha, the constant the model is usually quoted with.
    """

    def __init__(self, params: Model2Params = Model2Params()) -> None:
        self.p = params

    @property
    def params(self) -> Mapping[str, float]:
        return {"alpha": self.p.alpha}

    def hamiltonian(self, k: int, state: ContactState) -> float:
        self._check_noise_index(k)
        q = _scalar(state.q)
        if k == 1:
            return float(np.sin(q))
        p = _scalar(state.p)
        V, _ = self.p.potential(q)
        return 0.5 * p * p + V + 0.5 * self.p.alpha * state.s ** 2

    def gradient(self, k: int, state: ContactState) -> HamiltonianGradient:
        self._check_noise_index(k)
        q = _scalar(state.q)
        if k == 1:
            return _gradient(float(np.cos(q)), 0.0, 0.0)
        _, dV = self.p.potential(q)
        return _gradient(dV, _scalar(state.p), self.p.alpha * state.s)

    def lagrangian(self, q: np.ndarray, qdot: np.ndarray, s: float, t: float = 0.0) -> float:
        v = _scalar(qdot)
        V, _ = self.p.potential(_scalar(q))
        return 0.5 * v * v - V - 0.5 * self.p.alpha * s ** 2

    def nominal_conformal_rate(self) -> float:
        return self.p.alpha


class KeplerDrag(_OneDimensionalModel):
    """
    Radial Kepler problem with linear drag through the action and noise
    gamma*q. Only q > q_min is admissible; 1/|q| and 1/q^2 agree there.
    """

    def __init__(self, params: Model3Params = Model3Params()) -> None:
        self.p = params

    @property
    def params(self) -> Mapping[str, float]:
        return {"beta": self.p.beta, "gamma": self.p.gamma, "q_min": self.p.q_min}

    def check_domain(self, state: ContactState) -> None:
        q = _scalar(state.q)
        if q <= self.p.q_min:
            raise ModelDomainError(f"kepler-drag is singular at q={q:.3e} (q_min={self.p.q_min:.1e})")

    def hamiltonian(self, k: int, state: ContactState) -> float:
        self._check_noise_index(k)
        q = _scalar(state.q)
        if k == 1:
            return self.p.gamma * q
        p = _scalar(state.p)
        return 0.5 * p * p - 1.0 / q + self.p.beta * state.s

    def gradient(self, k: int, state: ContactState) -> HamiltonianGradient:
        self._check_noise_index(k)
        if k == 1:
            return _gradient(self.p.gamma, 0.0, 0.0)
        q = _scalar(state.q)
        return _gradient(1.0 / (q * q), _scalar(state.p), self.p.beta)

    def lagrangian(self, q: np.ndarray, qdot: np.ndarray, s: float, t: float = 0.0) -> float:
        x = _scalar(q)
        if x <= self.p.q_min:
            raise ModelDomainError(f"kepler-drag is singular at q={x:.3e} (q_min={self.p.q_min:.1e})")
        v = _scalar(qdot)
        return 0.5 * v * v + 1.0 / x - self.p.beta * s

    def nominal_conformal_rate(self) -> float:
        return self.p.beta
