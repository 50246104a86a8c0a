"""Model presets: spin chains and the Hubbard-type fermion Hamiltonian, all with free boundaries."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .lattice import FERMION, SPIN_HALF, Interaction, Region
from .operators import AssembledOperator, assemble, macro_observable, number_operator


@dataclass(frozen=True, eq=False)
class Model:
    """An interaction plus the builders that turn it into finite-volume operators."""

    name: str
    interaction: Interaction
    params: Mapping[str, float] = field(default_factory=dict)

    @property
    def site_kind(self) -> str:
        return self.interaction.site_kind

    @property
    def is_fermionic(self) -> bool:
        return self.site_kind == FERMION

    def region(self, L: int) -> Region:
        return Region.chain(L) if self.interaction.dimension == 1 else Region.cube(L, self.interaction.dimension)

    def _as_region(self, where) -> Region:
        return where if isinstance(where, Region) else self.region(int(where))

    def dim(self, L: int) -> int:
        return self.interaction.local_dim ** len(self._as_region(L))

    def hamiltonian(self, where) -> AssembledOperator:
        return assemble(self.interaction, self._as_region(where), label=f"H[{self.name}]")

    def number(self) -> Interaction:
        if not self.is_fermionic:
            raise ValueError(f"{self.name} has no particle number")
        return Interaction.build(self.interaction.dimension, FERMION, [([(0,) * self.interaction.dimension], "number", 1.0)], self.interaction.spins)

    def number_operator(self, where) -> AssembledOperator:
        if not self.is_fermionic:
            raise ValueError(f"{self.name} has no particle number")
        return number_operator(self._as_region(where), self.interaction.n_spins)

    def effective(self, beta: float, mu: float = 0.0) -> Interaction:
        """The absorbed interaction ``beta (Phi - mu n)``."""
        inter = self.interaction.scaled(beta)
        if mu and self.is_fermionic:
            inter = inter + self.number().scaled(-beta * mu)
        return inter


def _origin(d):
    return (0,) * d


def build_spin_chain(model: str = "transverse_ising", J: float = 1.0, h: float = 0.0) -> Model:
    """``transverse_ising``: ``-J sum z z - h sum x``; ``heisenberg``: ``J sum (1/4) s.s - h sum z``."""
    if model == "transverse_ising":
        terms = [([(0,), (1,)], "ising_zz", -J), ([(0,)], "sigma_x", -h)]
    elif model == "heisenberg":
        terms = [([(0,), (1,)], "heisenberg", J), ([(0,)], "sigma_z", -h)]
    else:
        raise ValueError(f"unknown spin model {model!r}")
    terms = [t for t in terms if t[2] != 0.0]
    return Model(model, Interaction.build(1, SPIN_HALF, terms, declared_range=1), {"J": J, "h": h})


def build_hubbard(
    T: Mapping[int, float] | float = 1.0,
    U: float = 0.0,
    J: Mapping[int, float] | float | None = None,
    spins=("up", "down"),
    name: str = "hubbard",
) -> Model:
    """Hopping ``T_r``, on-site ``U n_up n_down`` and density couplings ``J_r n_x n_{x+r}`` in 1D.

    A scalar ``T`` or ``J`` means nearest-neighbour only.
    """
    T = {1: float(T)} if np.isscalar(T) else {int(k): float(v) for k, v in T.items()}
    if J is None:
        J = {}
    J = {1: float(J)} if np.isscalar(J) else {int(k): float(v) for k, v in J.items()}
    for r in list(T) + list(J):
        if r < 1:
            raise ValueError("coupling distances must be positive")
    terms = []
    for r, t in sorted(T.items()):
        if t:
            terms.append(([(0,), (r,)], "hop", t))
    if U:
        terms.append(([(0,)], "hubbard_u", U))
    for r, j in sorted(J.items()):
        if j:
            terms.append(([(0,), (r,)], "density_density", j))
    R = max([r for r, v in list(T.items()) + list(J.items()) if v] or [0])
    inter = Interaction.build(1, FERMION, terms, spins=spins, declared_range=R)
    params = {"U": U, **{f"T{r}": t for r, t in T.items()}, **{f"J{r}": j for r, j in J.items()}}
    return Model(name, inter, params)


def build_tj(t: float = 1.0, J: float = 0.25, U: float = 20.0) -> Model:
    """Hubbard form with a density coupling and a large on-site repulsion.

    The large ``U`` only suppresses double occupancy energetically; no
    projection is applied.
    """
    return build_hubbard(T=t, U=U, J=J, name="tJ")


PRESETS: dict[str, Callable[..., Model]] = {
    "hubbard": lambda **p: build_hubbard(T=p.get("t", p.get("T", 1.0)), U=p.get("U", 0.0), J=p.get("J", 0.0)),
    "tJ": lambda **p: build_tj(t=p.get("t", 1.0), J=p.get("J", 0.25), U=p.get("U", 20.0)),
    "transverse_ising": lambda **p: build_spin_chain("transverse_ising", J=p.get("J", 1.0), h=p.get("h", 0.0)),
    "heisenberg": lambda **p: build_spin_chain("heisenberg", J=p.get("J", 1.0), h=p.get("h", 0.0)),
}


def make_model(preset: str, **params) -> Model:
    if preset not in PRESETS:
        raise KeyError(f"unknown model preset {preset!r}; choose from {sorted(PRESETS)}")
    return PRESETS[preset](**params)


def observable(model: Model, name: str) -> Interaction:
    """Macroscopic observable interaction ``Psi`` by name.

    ``energy`` returns the model interaction itself, so ``K = H``.
    """
    d = model.interaction.dimension
    o = _origin(d)
    if name == "energy":
        return model.interaction
    if model.is_fermionic:
        spins = model.interaction.spins
        if name == "number":
            return model.number()
        if name == "double_occupancy":
            return Interaction.build(d, FERMION, [([o], "hubbard_u", 1.0)], spins)
        raise ValueError(f"unknown fermionic observable {name!r}")
    single = {"magnetization_z": "sigma_z", "magnetization_x": "sigma_x", "magnetization_y": "sigma_y"}
    if name in single:
        return Interaction.build(d, SPIN_HALF, [([o], single[name], 1.0)], declared_range=0)
    if name == "zz":
        return Interaction.build(d, SPIN_HALF, [([(0,), (1,)], "ising_zz", 1.0)], declared_range=1)
    raise ValueError(f"unknown spin observable {name!r}")


def observable_operator(model: Model, name: str, where) -> AssembledOperator:
    return macro_observable(observable(model, name), model._as_region(where), label=name)
