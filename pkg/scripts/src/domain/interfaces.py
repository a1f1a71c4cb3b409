"""
Domain Layer — Interfaces (Abstract Contracts)
-----------------------------------------------
The shapes the rest of the package programs against. Models, discretizations
and steppers are implemented in the application layer; storage and plot
rendering in the infrastructure layer.

Everything here is immutable after construction, so one instance can be
shared read-only by concurrently running ensemble members.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Mapping, Sequence
from typing import Any

import numpy as np

from .entities import ContactState, DiscreteLagrangianData, HamiltonianGradient, RunManifest, StepResult


class Potential(ABC):
    """A scalar potential V(q) on the real line with its first two derivatives."""

    @abstractmethod
    def __call__(self, q: float) -> tuple[float, float]:
        """Return (V(q), V'(q))."""
        ...

    @abstractmethod
    def curvature(self, q: float) -> float:
        """Return V''(q)."""
        ...


class ContactModel(ABC):
    """
    A stochastic contact Hamiltonian system in Darboux coordinates:
    H_0 (drift), H_1..H_m (noise), analytic partials, and the Lagrangian
    obtained through L = p.qdot - H_0.
    """

    n: int
    m: int

    @property
    @abstractmethod
    def params(self) -> Mapping[str, float]:
        """Named real parameters (alpha, epsilon, beta, gamma, ... as applicable)."""
        ...

    @abstractmethod
    def hamiltonian(self, k: int, state: ContactState) -> float:
        """H_k at the state; k = 0 is the drift Hamiltonian."""
        ...

    @abstractmethod
    def gradient(self, k: int, state: ContactState) -> HamiltonianGradient:
        """Analytic (dH_k/dq, dH_k/dp, dH_k/ds)."""
        ...

    @abstractmethod
    def lagrangian(self, q: np.ndarray, qdot: np.ndarray, s: float, t: float = 0.0) -> float:
        """Continuous Lagrangian L(q, qdot, s, t)."""
        ...

    def check_domain(self, state: ContactState) -> None:
        """Raise ModelDomainError if the state is at a singularity. Default: no singularities."""
        return None

    def nominal_conformal_rate(self) -> float:
        """Rate c in the continuous-case factor exp(-c*h) the model is usually quoted with."""
        return 0.0


class DiscreteLagrangian(ABC):
    """
    A discretization L_j = L(q_j, q_{j+1}, s_j, s_{j+1}) of a ContactModel's
    Lagrangian together with the discrete noise Hamiltonians H_k^j.
    """

    n: int
    m: int
    model: ContactModel
    # Discretizations depending on p_j, p_{j+1} are not supported by the
    # criticality diagnostics; every implementation here is p-independent.
    momentum_independent: bool = True

    @abstractmethod
    def evaluate(
        self,
        q_j: np.ndarray,
        q_j1: np.ndarray,
        s_j: float,
        s_j1: float,
        h: float,
        t_j: float = 0.0,
    ) -> DiscreteLagrangianData:
        """L_j, H_k^j and all slot partials at the given arguments."""
        ...


class IStepper(ABC):
    """
    A one-step map (q_j, p_j, s_j) -> (q_{j+1}, p_{j+1}, s_{j+1}) for a given
    step size and noise increment vector of length m.
    """

    n: int
    m: int
    scheme: str

    @abstractmethod
    def step(self, state: ContactState, h: float, dW: np.ndarray) -> StepResult:
        ...


class IRunStorage(ABC):
    """
    Contract for where a CLI run puts its outputs.
    Every write is recorded so the manifest can list it with a checksum.
    """

    @abstractmethod
    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
        """Write one CSV file; returns its path relative to the run directory."""
        ...

    @abstractmethod
    def write_json(self, name: str, payload: Mapping[str, Any]) -> str:
        ...

    @abstractmethod
    def write_text(self, name: str, text: str) -> str:
        ...

    @abstractmethod
    def written(self) -> Mapping[str, str]:
        """Relative path -> SHA-256 hex digest of everything written so far."""
        ...

    @abstractmethod
    def write_manifest(self, manifest: RunManifest) -> str:
        ...


class IScriptRenderer(ABC):
    """Contract for turning emitted CSV files into a standalone plot script."""

    @abstractmethod
    def trajectories(self, csv_files: Mapping[str, str], n: int) -> str:
        ...

    @abstractmethod
    def diagnostics(self, residual_files: Mapping[str, str], lambda_files: Mapping[str, str]) -> str:
        ...

    @abstractmethod
    def convergence(self, csv_file: str) -> str:
        ...
