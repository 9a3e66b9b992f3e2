"""Boundary reaction models.

A model couples one scalar rate ``R(Y) = k * law(Y)`` to all species through
a stoichiometric vector ``nu``. The outward normal flux of species ``s`` on
the catalytic boundary is ``-nu[s] * R(Y)``: reactants (``nu < 0``) leave
the domain, products enter it.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np

SPECIES = ("CO", "O2", "CO2")
CO_OXIDATION_NU = (-2.0, -1.0, 1.0)


@dataclass(frozen=True)
class ReactionModel:
    """Scalar rate law ``k * law(Y)`` with analytic gradient.

    ``law`` and ``law_grad`` act on arrays of shape ``(n_species, m)`` and
    return shapes ``(m,)`` and ``(n_species, m)``.
    """

    name: str
    k: float
    nu: tuple[float, ...]
    law: Callable[[np.ndarray], np.ndarray]
    law_grad: Callable[[np.ndarray], np.ndarray]

    @property
    def n_species(self) -> int:
        return len(self.nu)

    @property
    def flux_sign(self) -> np.ndarray:
        """Per-species outward flux per unit rate, ``-nu``."""
        return -np.asarray(self.nu, dtype=float)

    def rate(self, Y):
        """Rate for states ``(n_species,)`` or ``(n_species, m)``."""
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            return float(self.k * self.law(Y[:, None])[0])
        return self.k * self.law(Y)

    def rate_grad(self, Y):
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            return self.k * self.law_grad(Y[:, None])[:, 0]
        return self.k * self.law_grad(Y)

    def with_k(self, k: float) -> "ReactionModel":
        return dataclasses.replace(self, k=float(k))


def mass_action(k: float, orders, nu, name: str = "mass_action") -> ReactionModel:
    """Mass action rate ``k * prod_s Y_s**orders[s]`` with integer orders."""
    if k < 0:
        raise ValueError("rate constant must be non-negative")
    orders = np.asarray(orders, dtype=int)
    if len(orders) != len(nu):
        raise ValueError("orders and nu must have the same length")
    col = orders[:, None]

    def law(Y):
        return np.prod(Y**col, axis=0)

    def law_grad(Y):
        g = np.empty_like(Y)
        for s, m in enumerate(orders):
            if m == 0:
                g[s] = 0.0
                continue
            others = np.delete(np.arange(len(orders)), s)
            g[s] = m * Y[s] ** (m - 1) * np.prod(Y[others] ** col[others], axis=0)
        return g

    return ReactionModel(name, float(k), tuple(float(v) for v in nu), law, law_grad)


def mass_action_co_oxidation(k: float) -> ReactionModel:
    """``2 CO + O2 -> 2 CO2`` with ``R = k * Y_CO**2 * Y_O2``."""
    return mass_action(k, (2, 1, 0), CO_OXIDATION_NU, name="mass_action_co_ox")


def first_order_co_oxidation(k: float) -> ReactionModel:
    """Same stoichiometry, rate ``k * Y_CO * Y_O2``."""
    return mass_action(k, (1, 1, 0), CO_OXIDATION_NU, name="first_order_co_ox")


def boundary_flux(model: ReactionModel, Y):
    """Outward flux density per species, ``-nu * R(Y)``."""
    Y = np.asarray(Y, dtype=float)
    r = model.rate(Y.reshape(model.n_species, -1))
    out = model.flux_sign[:, None] * r
    return out.reshape(Y.shape)


MODELS = {
    "mass_action_co_ox": mass_action_co_oxidation,
    "first_order_co_ox": first_order_co_oxidation,
}


def make_model(kind: str, k: float) -> ReactionModel:
    try:
        return MODELS[kind](k)
    except KeyError:
        raise ValueError(f"unknown reaction model {kind!r}; known: {sorted(MODELS)}") from None
