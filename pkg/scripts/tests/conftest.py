from __future__ import annotations

from collections.abc import Mapping

import numpy as np
import pytest

from src.application.models import (
    DampedMultiplicative,
    DampedOscillatorAdditive,
    KeplerDrag,
    Model1Params,
    Model2Params,
    Model3Params,
)
from src.domain.entities import ContactState, HamiltonianGradient
from src.domain.interfaces import ContactModel, Potential

H = 0.1


class QuarticPotential(Potential):
    """V(q) = q^4/4 + q^2/2, for exercising non-quadratic potentials."""

    def __call__(self, q: float) -> tuple[float, float]:
        return 0.25 * q ** 4 + 0.5 * q * q, q ** 3 + q

    def curvature(self, q: float) -> float:
        return 3.0 * q * q + 1.0


class ZeroModel(ContactModel):
    """H_0 = H_1 = 0: no drift, no diffusion."""

    n = 1
    m = 1

    @property
    def params(self) -> Mapping[str, float]:
        return {}

    def hamiltonian(self, k, state):
        return 0.0

    def gradient(self, k, state):
        return HamiltonianGradient(dq=[0.0], dp=[0.0], ds=0.0)

    def lagrangian(self, q, qdot, s, t=0.0):
        return 0.0


def make_state(q: float, p: float, s: float, t: float = 0.0) -> ContactState:
    return ContactState(q=[q], p=[p], s=s, t=t)


@pytest.fixture
def reference_state() -> ContactState:
    return make_state(0.75, -0.25, 0.08)


@pytest.fixture
def escaping_state() -> ContactState:
    """Positive-energy kepler-drag state that stays away from the singularity."""
    return make_state(5.0, 4.0, 0.08)


@pytest.fixture
def model1() -> DampedOscillatorAdditive:
    return DampedOscillatorAdditive(Model1Params(alpha=0.1, epsilon=0.02))


@pytest.fixture
def model2() -> DampedMultiplicative:
    return DampedMultiplicative(Model2Params(alpha=0.1))


@pytest.fixture
def model3() -> KeplerDrag:
    return KeplerDrag(Model3Params(beta=0.01, gamma=0.1))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
