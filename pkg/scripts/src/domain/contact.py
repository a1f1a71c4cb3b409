"""
Contact-core operations: the contact one-form and validated evaluation of a
model's Hamiltonians and partials.
"""

from __future__ import annotations

import numpy as np

from .entities import ContactForm, ContactState, HamiltonianGradient
from .interfaces import ContactModel


def contact_form_at(state: ContactState) -> ContactForm:
    """eta = ds - p.dq at the state, as (-p, 0_n, 1)."""
    return ContactForm(np.concatenate([-state.p, np.zeros(state.n), [1.0]]))


def _check_index(model: ContactModel, k: int) -> None:
    if not 0 <= k <= model.m:
        raise IndexError(f"Hamiltonian index {k} outside 0..{model.m}")


def eval_hamiltonian(model: ContactModel, k: int, state: ContactState) -> float:
    _check_index(model, k)
    model.check_domain(state)
    return float(model.hamiltonian(k, state))


def eval_gradients(model: ContactModel, k: int, state: ContactState) -> HamiltonianGradient:
    _check_index(model, k)
    model.check_domain(state)
    return model.gradient(k, state)


def legendre_residual(model: ContactModel, state: ContactState) -> float:
    """
    L(q, qdot, s) + H_0(q, p, s) - p.qdot with qdot = p.
    Zero for models whose Lagrangian comes from L = p.qdot - H_0.
    """
    qdot = state.p
    lhs = model.lagrangian(state.q, qdot, state.s, state.t) + eval_hamiltonian(model, 0, state)
    return float(lhs - state.p @ qdot)
