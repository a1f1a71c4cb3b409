"""
Name -> model lookup for the CLI and the experiment service.

A ModelSpec knows how to build the continuous model from named parameters,
its discrete Lagrangian, and each stepper the CLI can select:

    contact   closed-form contact scheme
    generic   generic Herglotz step (Newton on the discrete Lagrangian)
    em        Euler-Maruyama baseline
"""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from functools import partial

from src.domain.entities import SolverOptions
from src.domain.errors import ConfigError
from src.domain.interfaces import ContactModel, DiscreteLagrangian, IStepper

from .discretizations import AdditiveNoiseLagrangian, KeplerLagrangian, MultiplicativeNoiseLagrangian
from .herglotz import VariationalContactStepper
from .models import (
    DampedMultiplicative,
    DampedOscillatorAdditive,
    KeplerDrag,
    Model1Params,
    Model2Params,
    Model3Params,
)
from .schemes import (
    SchemeStepper,
    model1_contact_step,
    model1_em_step,
    model1_step_jacobian,
    model2_contact_step,
    model2_em_step,
    model3_contact_step,
    model3_em_step,
)

STEPPER_SCHEMES = ("contact", "generic", "em")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    defaults: Mapping[str, float]
    default_steps: int
    build: Callable[[Mapping[str, float]], ContactModel]
    discretize: Callable[[ContactModel], DiscreteLagrangian]
    contact: Callable[[ContactModel, SolverOptions], IStepper]
    em: Callable[[ContactModel], IStepper]
    initial: tuple[float, float, float] = field(default=(0.75, -0.25, 0.08))

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(self.defaults)

    def model(self, params: Mapping[str, float] | None = None) -> ContactModel:
        merged = {**self.defaults, **(params or {})}
        unknown = set(merged) - set(self.defaults)
        if unknown:
            raise ConfigError(f"{self.name} does not take parameter(s): {', '.join(sorted(unknown))}")
        return self.build(merged)

    def stepper(self, model: ContactModel, scheme: str, opts: SolverOptions = SolverOptions()) -> IStepper:
        if scheme == "contact":
            return self.contact(model, opts)
        if scheme == "generic":
            return VariationalContactStepper(self.discretize(model), opts)
        if scheme == "em":
            return self.em(model)
        raise ConfigError(f"unknown scheme {scheme!r}; expected one of {', '.join(STEPPER_SCHEMES)}")


def _model1_contact(model: DampedOscillatorAdditive, opts: SolverOptions) -> IStepper:
    return SchemeStepper(
        "contact",
        partial(model1_contact_step, model.p),
        jacobian=partial(model1_step_jacobian, model.p),
    )


def _model2_contact(model: DampedMultiplicative, opts: SolverOptions) -> IStepper:
    # the quadratic action update is solved in closed form
    return SchemeStepper("contact", partial(model2_contact_step, model.p))


def _model3_contact(model: KeplerDrag, opts: SolverOptions) -> IStepper:
    return SchemeStepper("contact", partial(model3_contact_step, model.p, opts=opts))


_REGISTRY: dict[str, ModelSpec] = {
    spec.name: spec
    for spec in (
        ModelSpec(
            name="damped-oscillator-additive",
            defaults={"alpha": 0.1, "epsilon": 0.02},
            default_steps=200,
            build=lambda p: DampedOscillatorAdditive(Model1Params(alpha=p["alpha"], epsilon=p["epsilon"])),
            discretize=AdditiveNoiseLagrangian,
            contact=_model1_contact,
            em=lambda model: SchemeStepper("em", partial(model1_em_step, model.p)),
        ),
        ModelSpec(
            name="damped-multiplicative",
            defaults={"alpha": 0.1},
            default_steps=200,
            build=lambda p: DampedMultiplicative(Model2Params(alpha=p["alpha"])),
            discretize=MultiplicativeNoiseLagrangian,
            contact=_model2_contact,
            em=lambda model: SchemeStepper("em", partial(model2_em_step, model.p)),
        ),
        ModelSpec(
            name="kepler-drag",
            defaults={"beta": 0.01, "gamma": 0.1, "q_min": 1e-8},
            default_steps=2000,
            build=lambda p: KeplerDrag(Model3Params(beta=p["beta"], gamma=p["gamma"], q_min=p["q_min"])),
            discretize=KeplerLagrangian,
            contact=_model3_contact,
            em=lambda model: SchemeStepper("em", partial(model3_em_step, model.p)),
        ),
    )
}


def model_names() -> tuple[str, ...]:
    return tuple(_REGISTRY)


def get_model_spec(name: str) -> ModelSpec:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; valid models: {', '.join(model_names())}") from None
