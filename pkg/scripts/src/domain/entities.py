from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import InvalidStateError


def _frozen(values: Any, name: str, ndim: int = 1) -> np.ndarray:
    """Copy to a read-only float64 array of the given rank, rejecting NaN/Inf."""
    arr = np.array(values, dtype=np.float64, ndmin=ndim)
    if arr.ndim != ndim:
        raise InvalidStateError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidStateError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _finite_scalar(value: Any, name: str) -> float:
    x = float(value)
    if not np.isfinite(x):
        raise InvalidStateError(f"{name} must be finite, got {value!r}")
    return x


@dataclass(frozen=True, eq=False)
class ContactState:
    """
    Immutable point (q, p, s) of the (2n+1)-dimensional contact manifold,
    stamped with its time t.

    The vector layout used everywhere (Jacobians, contact forms, CSV rows)
    is (q-block, p-block, s).
    """
    q: np.ndarray
    p: np.ndarray
    s: float
    t: float = 0.0

    def __post_init__(self) -> None:
        q = _frozen(self.q, "q")
        p = _frozen(self.p, "p")
        if q.size < 1 or q.shape != p.shape:
            raise InvalidStateError(f"q and p must share a length n >= 1, got {q.shape} and {p.shape}")
        t = _finite_scalar(self.t, "t")
        if t < 0.0:
            raise InvalidStateError(f"t must be >= 0, got {t}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "s", _finite_scalar(self.s, "s"))
        object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return int(self.q.size)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.p, [self.s]])

    @classmethod
    def from_vector(cls, x: np.ndarray, t: float = 0.0) -> ContactState:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.size < 3 or x.size % 2 != 1:
            raise InvalidStateError(f"state vector must have odd length 2n+1 >= 3, got {x.shape}")
        n = (x.size - 1) // 2
        return cls(q=x[:n], p=x[n:2 * n], s=x[2 * n], t=t)

    def __repr__(self) -> str:
        return f"ContactState(q={self.q.tolist()}, p={self.p.tolist()}, s={self.s!r}, t={self.t!r})"


@dataclass(frozen=True, eq=False)
class ContactForm:
    """Coefficients of eta = ds - p.dq at a state, ordered (dq block, dp block, ds)."""
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeffs", _frozen(self.coeffs, "coeffs"))

    @property
    def n(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def q_block(self) -> np.ndarray:
        return self.coeffs[: self.n]

    @property
    def p_block(self) -> np.ndarray:
        return self.coeffs[self.n: 2 * self.n]

    @property
    def s_component(self) -> float:
        return float(self.coeffs[-1])


@dataclass(frozen=True, eq=False)
class HamiltonianGradient:
    """Partials of one Hamiltonian: dH/dq (n), dH/dp (n), dH/ds (scalar)."""
    dq: np.ndarray
    dp: np.ndarray
    ds: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "dq", _frozen(self.dq, "dq"))
        object.__setattr__(self, "dp", _frozen(self.dp, "dp"))
        object.__setattr__(self, "ds", _finite_scalar(self.ds, "ds"))


@dataclass(frozen=True, eq=False)
class WienerPath:
    """
    Realisation of m independent Wiener processes on the uniform grid
    t_j = j*h, j = 0..N. values has shape (N+1, m) and values[0] == 0.

    (seed, level) identify the random streams the path was drawn from, so the
    same tuple always reproduces the same matrix.
    """
    m: int
    N: int
    h: float
    values: np.ndarray
    seed: int
    level: int = 0

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64).reshape(self.N + 1, self.m)
        if not np.all(np.isfinite(values)):
            raise InvalidStateError("Wiener path contains non-finite values")
        if np.any(values[0] != 0.0):
            raise InvalidStateError("Wiener path must start at W(0) = 0")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N + 1, dtype=np.float64) * self.h

    @property
    def T(self) -> float:
        return self.N * self.h


@dataclass(frozen=True)
class SolverOptions:
    """Newton settings for every implicit solve (infinity-norm on the residual)."""
    tol: float = 1e-12
    max_iters: int = 50


@dataclass(frozen=True, eq=False)
class DiscreteLagrangianData:
    """
    Per-step discrete quantities L_j, H_k^j and their partials with respect to
    the slots (q_j, q_{j+1}, s_j, s_{j+1}). Noise partials are m x n matrices.
    """
    value_L: float
    value_Hk: np.ndarray
    dL_dqj: np.ndarray
    dL_dqj1: np.ndarray
    dL_dsj: float
    dL_dsj1: float
    dHk_dqj: np.ndarray
    dHk_dqj1: np.ndarray
    dHk_dsj: np.ndarray
    dHk_dsj1: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "value_L", _finite_scalar(self.value_L, "value_L"))
        object.__setattr__(self, "dL_dsj", _finite_scalar(self.dL_dsj, "dL_dsj"))
        object.__setattr__(self, "dL_dsj1", _finite_scalar(self.dL_dsj1, "dL_dsj1"))
        for name in ("value_Hk", "dL_dqj", "dL_dqj1", "dHk_dsj", "dHk_dsj1"):
            object.__setattr__(self, name, _frozen(getattr(self, name), name))
        for name in ("dHk_dqj", "dHk_dqj1"):
            object.__setattr__(self, name, _frozen(getattr(self, name), name, ndim=2))


@dataclass(frozen=True, eq=False)
class DEQuantities:
    """D (vector n) and E (scalar) entering the discrete momenta."""
    D: np.ndarray
    E: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "D", _frozen(self.D, "D"))
        object.__setattr__(self, "E", _finite_scalar(self.E, "E"))


@dataclass(frozen=True)
class StepResult:
    """
    Outcome of one accepted step. conformal_factor is None for schemes that
    do not define one (Euler-Maruyama).
    """
    next: ContactState
    conformal_factor: float | None
    newton_iters: int = 0
    residual: float = 0.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Time-indexed states plus the per-step records of the stepper that made them.

    conformal_factors[j] and increments[j] belong to the step x_j -> x_{j+1}.
    If a step failed, states holds everything up to the failing index and
    error carries the wrapped exception.
    """
    states: tuple[ContactState, ...]
    conformal_factors: tuple[float | None, ...]
    increments: np.ndarray
    scheme: str
    newton_iters: int = 0
    max_residual: float = 0.0
    error: Exception | None = None

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    @property
    def is_complete(self) -> bool:
        return self.error is None

    @property
    def times(self) -> np.ndarray:
        return np.array([x.t for x in self.states])

    @property
    def q(self) -> np.ndarray:
        return np.array([x.q for x in self.states])

    @property
    def p(self) -> np.ndarray:
        return np.array([x.p for x in self.states])

    @property
    def s(self) -> np.ndarray:
        return np.array([x.s for x in self.states])

    @property
    def lambdas(self) -> np.ndarray:
        """Conformal factors as floats, NaN where the scheme records none."""
        return np.array([np.nan if lam is None else lam for lam in self.conformal_factors])

    def raise_for_error(self) -> None:
        if self.error is not None:
            raise self.error


@dataclass(frozen=True, eq=False)
class StepJacobian:
    """Derivative of the one-step map in (q, p, s) layout at a fixed increment."""
    J: np.ndarray
    method: str
    fd_step: float | None = None


@dataclass(frozen=True, eq=False)
class ContactReport:
    """
    Per-step residuals r_j = ||J_j^T eta(x_{j+1}) - lambda_j eta(x_j)||_inf.
    This pullback residual is our operational reading of the contact identity.
    """
    residuals: np.ndarray
    lambdas: np.ndarray
    lambda_ref: np.ndarray
    label: str = "pullback residual ||J^T eta(x_{j+1}) - lambda_j eta(x_j)||_inf"

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0

    @property
    def mean_residual(self) -> float:
        return float(np.mean(self.residuals)) if self.residuals.size else 0.0


@dataclass(frozen=True, eq=False)
class ConformalComparison:
    """Discrete conformal factors next to a reference series and the nominal exp(-rate*h)."""
    lambdas: np.ndarray
    reference: np.ndarray
    nominal: np.ndarray
    mode: str

    @property
    def abs_diff(self) -> np.ndarray:
        return np.abs(self.lambdas - self.reference)


@dataclass(frozen=True)
class EnsembleStats:
    """Sample estimates of the mean-square norm sqrt(E|X|^2), whole state and per block."""
    sample_count: int
    norm: float
    q_norm: float
    p_norm: float
    s_norm: float


@dataclass(frozen=True, eq=False)
class ConvergenceTable:
    """Strong error of the terminal state against the finest dyadic level."""
    h: np.ndarray
    strong_error: np.ndarray
    samples: int
    failures: int
    slope: float


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to audit one CLI run: inputs, versions, outputs, timings."""
    command: str
    config: dict[str, Any]
    versions: dict[str, str]
    files: dict[str, str]
    elapsed_secs: float
    solver: dict[str, float]
    partial: bool = False


@dataclass(frozen=True)
class RunResult:
    """
    Immutable summary of one CLI command.
    Returned by the application service when the command finishes.
    """
    command: str
    status: str
    exit_code: int
    elapsed_secs: float
    files: tuple[str, ...] = field(default_factory=tuple)
    summary: dict[str, Any] = field(default_factory=dict)
    error_message: str | None = None
