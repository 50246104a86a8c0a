"""Dense matrix representations on the Hilbert space of a finite region.

Spin-1/2 sites are tensor factors in lexicographic site order. Fermionic
regions use the ordered-product CAR representation of :mod:`qlatt.fock`,
with modes ordered by (site, spin), site-major.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import fock
from .lattice import (
    FERMION,
    SPIN_HALF,
    FermionTemplate,
    Interaction,
    Placement,
    Region,
    boundary_terms,
    terms_in,
)

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    region: Region
    matrix: np.ndarray
    site_kind: str = SPIN_HALF
    n_spins: int = 1
    label: str = ""
    hermitian: bool = True

    def __post_init__(self):
        m = self.matrix
        dim = local_dim(self.site_kind, self.n_spins) ** len(self.region)
        if m.shape != (dim, dim):
            raise ValueError(f"{self.label or 'operator'}: expected shape {(dim, dim)}, got {m.shape}")
        if self.hermitian and m.size and np.max(np.abs(m - m.conj().T)) >= HERMITIAN_TOL * max(1.0, np.max(np.abs(m))):
            raise ValueError(f"{self.label or 'operator'} is flagged Hermitian but is not")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_modes(self) -> int:
        return len(self.region) * self.n_spins

    def __add__(self, other: "AssembledOperator") -> "AssembledOperator":
        self._check_compatible(other)
        return AssembledOperator(
            self.region, self.matrix + other.matrix, self.site_kind, self.n_spins, self.label, self.hermitian and other.hermitian
        )

    def __sub__(self, other: "AssembledOperator") -> "AssembledOperator":
        self._check_compatible(other)
        return AssembledOperator(
            self.region, self.matrix - other.matrix, self.site_kind, self.n_spins, self.label, self.hermitian and other.hermitian
        )

    def __mul__(self, c: float) -> "AssembledOperator":
        herm = self.hermitian and np.isreal(c)
        return AssembledOperator(self.region, c * self.matrix, self.site_kind, self.n_spins, self.label, bool(herm))

    __rmul__ = __mul__

    def relabel(self, label: str) -> "AssembledOperator":
        return AssembledOperator(self.region, self.matrix, self.site_kind, self.n_spins, label, self.hermitian)

    def _check_compatible(self, other):
        if self.region != other.region or self.site_kind != other.site_kind:
            raise ValueError("operators live on different spaces")


def local_dim(site_kind: str, n_spins: int = 1) -> int:
    return 2 if site_kind == SPIN_HALF else 2**n_spins


def _as_real_if_possible(m: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(m) and not np.any(m.imag):
        return np.ascontiguousarray(m.real)
    return m


def _bit_scatter(n_local: int, positions: Sequence[int], n_total: int) -> np.ndarray:
    """Global index contribution of every local basis index placed at ``positions``."""
    local = np.arange(1 << n_local, dtype=np.int64)
    out = np.zeros_like(local)
    for j, pos in enumerate(positions):
        bit = (local >> (n_local - 1 - j)) & 1
        out |= bit << (n_total - 1 - pos)
    return out


def _add_spin_placement(out: np.ndarray, local: np.ndarray, positions: Sequence[int], n_sites: int) -> None:
    k = len(positions)
    rest = [p for p in range(n_sites) if p not in set(positions)]
    local_idx = _bit_scatter(k, positions, n_sites)
    rest_idx = _bit_scatter(len(rest), rest, n_sites)
    r, c = np.nonzero(local)
    vals = local[r, c]
    rows = (local_idx[r][:, None] + rest_idx[None, :]).ravel()
    cols = (local_idx[c][:, None] + rest_idx[None, :]).ravel()
    out[rows, cols] += np.repeat(vals, len(rest_idx))


def _add_fermion_monomials(out: np.ndarray, monomials, n_modes: int) -> None:
    for coef, factors in monomials:
        m = fock.monomial(factors, n_modes).tocoo()
        out[m.row, m.col] += coef * m.data


def assemble_placements(
    interaction: Interaction, placements: Sequence[Placement], region: Region
) -> np.ndarray:
    """Dense sum of placed terms on the Hilbert space of ``region``."""
    n = len(region)
    complex_needed = any(
        np.iscomplexobj(t.template) if not isinstance(t.template, FermionTemplate) else any(np.iscomplex(c) for c, _ in t.template.monomials)
        for _, t in placements
    )
    if interaction.site_kind == SPIN_HALF:
        out = np.zeros((1 << n, 1 << n), dtype=complex if complex_needed else float)
        for sites, term in placements:
            positions = [region.index(s) for s in sites]
            _add_spin_placement(out, term.coefficient * term.template, positions, n)
        return _as_real_if_possible(out)
    ns = interaction.n_spins
    n_modes = n * ns
    out = np.zeros((1 << n_modes, 1 << n_modes), dtype=complex)
    for sites, term in placements:
        modes = [region.index(s) * ns for s in sites]
        monos = [(term.coefficient * c, f) for c, f in term.template.mode_factors(modes)]
        _add_fermion_monomials(out, monos, n_modes)
    return _as_real_if_possible(out)


def assemble(
    interaction: Interaction, region: Region, ambient: Region | None = None, label: str = ""
) -> AssembledOperator:
    """``sum_{X subset region} phi_X``, optionally acting on the larger ``ambient`` space."""
    space = ambient if ambient is not None else region
    if ambient is not None and not region.issubset(ambient):
        raise ValueError("region must lie inside the ambient region")
    m = assemble_placements(interaction, terms_in(interaction, region), space)
    return AssembledOperator(space, m, interaction.site_kind, interaction.n_spins, label)


def surface_term(interaction: Interaction, region: Region, ambient: Region) -> AssembledOperator:
    """``W_region(ambient)``: terms inside ``ambient`` crossing the boundary of ``region``."""
    m = assemble_placements(interaction, boundary_terms(interaction, region, ambient), ambient)
    return AssembledOperator(ambient, m, interaction.site_kind, interaction.n_spins, "W")


def macro_observable(psi: Interaction, region: Region, ambient: Region | None = None, label: str = "K") -> AssembledOperator:
    """``K_region = sum_{X subset region} psi_X``; fermionic terms must be even."""
    op = assemble(psi, region, ambient, label)
    if psi.site_kind == FERMION and parity(op) != "even":
        raise ValueError("fermionic macroscopic observables must be even")
    return op


def local_operator(matrix, sites: Sequence, site_kind: str = SPIN_HALF, n_spins: int = 1, label: str = "") -> AssembledOperator:
    """Wrap a matrix acting on the listed sites (in that order) as an operator on their region."""
    sites = [tuple(s) if isinstance(s, (list, tuple)) else (int(s),) for s in sites]
    region = Region.from_sites(sites)
    m = np.asarray(matrix)
    order = sorted(range(len(sites)), key=lambda i: sites[i])
    if order != list(range(len(sites))):
        if site_kind == FERMION:
            raise ValueError("fermionic local matrices must list sites in lexicographic order")
        k = len(sites)
        t = m.reshape((2,) * (2 * k)).transpose(order + [k + i for i in order])
        m = t.reshape(m.shape)
    herm = bool(np.allclose(m, m.conj().T, atol=HERMITIAN_TOL))
    return AssembledOperator(region, _as_real_if_possible(np.array(m)), site_kind, n_spins, label, herm)


def embed(op: AssembledOperator, region: Region) -> AssembledOperator:
    """Natural inclusion of an operator on ``X`` into the algebra of ``region``.

    Fermionic operators are rewritten as ordered CAR monomials and rebuilt
    with the strings of the larger region; odd operators are rejected.
    """
    if not op.region.issubset(region):
        raise ValueError("support is not contained in the target region")
    n = len(region)
    if op.site_kind == SPIN_HALF:
        m = op.matrix
        out = np.zeros((1 << n, 1 << n), dtype=m.dtype)
        _add_spin_placement(out, m, [region.index(s) for s in op.region.sites], n)
        return AssembledOperator(region, out, op.site_kind, 1, op.label, op.hermitian)
    if parity(op) not in ("even",):
        raise ValueError("only even fermionic operators can be embedded as observables")
    ns = op.n_spins
    n_modes = n * ns
    local_modes = len(op.region) * ns
    first = [region.index(s) * ns for s in op.region.sites]
    mode_map = [first[m // ns] + m % ns for m in range(local_modes)]
    monos = [
        (coef, [(mode_map[m], d) for m, d in factors]) for coef, factors in fock.expand_matrix(op.matrix, local_modes)
    ]
    out = np.zeros((1 << n_modes, 1 << n_modes), dtype=complex)
    _add_fermion_monomials(out, monos, n_modes)
    return AssembledOperator(region, _as_real_if_possible(out), op.site_kind, ns, op.label, op.hermitian)


def identity(region: Region, site_kind: str = SPIN_HALF, n_spins: int = 1) -> AssembledOperator:
    dim = local_dim(site_kind, n_spins) ** len(region)
    return AssembledOperator(region, np.eye(dim), site_kind, n_spins, "1")


def _spin_index(spin, n_spins: int, spins: Sequence[str] | None) -> int:
    if isinstance(spin, str):
        names = list(spins or ("up", "down"))
        if spin not in names:
            raise ValueError(f"unknown spin label {spin!r}")
        return names.index(spin)
    if not 0 <= int(spin) < n_spins:
        raise ValueError(f"spin index {spin} outside 0..{n_spins - 1}")
    return int(spin)


def car_ops(region: Region, site, spin, n_spins: int = 2, spins: Sequence[str] | None = None):
    """Dense annihilation and creation operators ``(c_{x,s}, c*_{x,s})`` on ``region``."""
    site = tuple(site) if isinstance(site, (list, tuple)) else (int(site),)
    if site not in region:
        raise ValueError(f"site {site} is not in the region")
    s = _spin_index(spin, n_spins, spins)
    n_modes = len(region) * n_spins
    mode = region.index(site) * n_spins + s
    c = fock.monomial([(mode, False)], n_modes).toarray()
    return c, c.T.copy()


def number_operator(region: Region, n_spins: int = 2) -> AssembledOperator:
    diag = fock.number_diagonal(len(region) * n_spins)
    return AssembledOperator(region, np.diag(diag), FERMION, n_spins, "N")


def parity_operator(region: Region, n_spins: int = 2) -> np.ndarray:
    return np.diag(fock.parity_diagonal(len(region) * n_spins))


def parity(op) -> str:
    """``even``, ``odd`` or ``mixed`` under conjugation by ``(-1)^N``."""
    if isinstance(op, AssembledOperator):
        m, n_modes = op.matrix, op.n_modes
    else:
        m = np.asarray(op)
        n_modes = int(round(np.log2(m.shape[0])))
    p = fock.parity_diagonal(n_modes)
    flip = p[:, None] * p[None, :]
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if np.max(np.abs(m * (1 - flip))) < 1e-12 * scale:
        return "even"
    if np.max(np.abs(m * (1 + flip))) < 1e-12 * scale:
        return "odd"
    return "mixed"


def commutator_norm(a, b) -> float:
    a = a.matrix if isinstance(a, AssembledOperator) else a
    b = b.matrix if isinstance(b, AssembledOperator) else b
    c = a @ b - b @ a
    return float(np.linalg.norm(c, 2)) if c.shape[0] <= 512 else float(np.linalg.norm(c, "fro"))
