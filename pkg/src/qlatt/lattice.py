"""Lattice geometry, translation-invariant interactions and their norms.

An :class:`Interaction` stores one operator template per translation class of
finite sets ``X`` (given as offsets containing the origin). Translates are
produced on demand by :func:`terms_in` and :func:`boundary_terms`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.sparse as sp

from . import fock

Site = tuple[int, ...]

SPIN_HALF = "spin-half"
FERMION = "fermion"
SITE_KINDS = (SPIN_HALF, FERMION)

PAULI = {
    "I": np.eye(2),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]]),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]]),
}


@dataclass(frozen=True)
class Region:
    """Finite subset of Z^d, kept as a lexicographically sorted tuple of sites."""

    dimension: int
    sites: tuple[Site, ...]

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        sites = tuple(sorted({tuple(int(c) for c in s) for s in self.sites}))
        if len(sites) != len(self.sites):
            raise ValueError("sites must be distinct")
        if any(len(s) != self.dimension for s in sites):
            raise ValueError(f"every site needs {self.dimension} coordinates")
        object.__setattr__(self, "sites", sites)

    @classmethod
    def from_sites(cls, sites: Iterable[Sequence[int]], dimension: int | None = None) -> "Region":
        sites = [tuple(int(c) for c in s) for s in sites]
        if dimension is None:
            if not sites:
                raise ValueError("cannot infer the dimension of an empty region")
            dimension = len(sites[0])
        return cls(dimension, tuple(sites))

    @classmethod
    def chain(cls, length: int, start: int = 0) -> "Region":
        return cls(1, tuple((start + i,) for i in range(length)))

    @classmethod
    def cube(cls, side: int, dimension: int = 1, origin: Sequence[int] | None = None) -> "Region":
        origin = tuple(origin) if origin is not None else (0,) * dimension
        pts = itertools.product(range(side), repeat=dimension)
        return cls(dimension, tuple(tuple(o + p for o, p in zip(origin, q)) for q in pts))

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    @cached_property
    def _index(self) -> dict[Site, int]:
        return {s: i for i, s in enumerate(self.sites)}

    def __contains__(self, site) -> bool:
        return tuple(site) in self._index

    def index(self, site: Site) -> int:
        return self._index[tuple(site)]

    def issubset(self, other: "Region") -> bool:
        return all(s in other for s in self.sites)

    def difference(self, other: "Region") -> "Region":
        return Region(self.dimension, tuple(s for s in self.sites if s not in other))

    def union(self, other: "Region") -> "Region":
        return Region(self.dimension, tuple(set(self.sites) | set(other.sites)))

    def translate(self, shift: Sequence[int]) -> "Region":
        return Region(self.dimension, tuple(tuple(a + b for a, b in zip(s, shift)) for s in self.sites))

    def cube_side(self) -> int | None:
        """Side length if the region is a full hypercube, else ``None``."""
        if not self.sites:
            return None
        lo = [min(s[k] for s in self.sites) for k in range(self.dimension)]
        hi = [max(s[k] for s in self.sites) for k in range(self.dimension)]
        sides = {h - l + 1 for l, h in zip(lo, hi)}
        if len(sides) != 1:
            return None
        side = sides.pop()
        return side if side**self.dimension == len(self) else None


def diameter(sites: Sequence[Site]) -> int:
    """Sup-metric diameter; a single site has diameter 0."""
    if len(sites) <= 1:
        return 0
    return max(max(abs(a - b) for a, b in zip(x, y)) for x, y in itertools.combinations(sites, 2))


# ---------------------------------------------------------------------------
# operator templates


@dataclass(frozen=True)
class FermionTemplate:
    """Even polynomial in CAR generators on ``n_sites`` local sites.

    ``monomials`` holds ``(coefficient, factors)`` with factors
    ``(site_index, spin_index, dagger)``, multiplied left to right.
    """

    n_sites: int
    n_spins: int
    monomials: tuple[tuple[complex, tuple[tuple[int, int, bool], ...]], ...]

    def __post_init__(self):
        for _, factors in self.monomials:
            if not fock.is_even_factors(factors):
                raise ValueError("odd fermionic monomial: observables must be even")
            for site, spin, _ in factors:
                if not (0 <= site < self.n_sites and 0 <= spin < self.n_spins):
                    raise ValueError(f"factor ({site}, {spin}) outside the template support")

    def mode_factors(self, site_modes: Sequence[int]):
        """Monomials with local sites mapped to the given first-mode numbers."""
        return [
            (coef, [(site_modes[site] + spin, dagger) for site, spin, dagger in factors])
            for coef, factors in self.monomials
        ]

    def matrix(self) -> np.ndarray:
        n_modes = self.n_sites * self.n_spins
        modes = [i * self.n_spins for i in range(self.n_sites)]
        out = sp.csr_matrix((1 << n_modes, 1 << n_modes), dtype=complex)
        for coef, factors in self.mode_factors(modes):
            out = out + coef * fock.monomial(factors, n_modes)
        return _maybe_real(out.toarray())

    def remap_sites(self, order: Sequence[int]) -> "FermionTemplate":
        """Relabel local site ``order[k]`` as ``k``."""
        new_index = {old: new for new, old in enumerate(order)}
        monos = tuple(
            (coef, tuple((new_index[s], spin, d) for s, spin, d in factors)) for coef, factors in self.monomials
        )
        return FermionTemplate(self.n_sites, self.n_spins, monos)

    @classmethod
    def from_matrix(cls, matrix, n_sites: int, n_spins: int, tol: float = 0.0) -> "FermionTemplate":
        n_modes = n_sites * n_spins
        monos = []
        for coef, factors in fock.expand_matrix(np.asarray(matrix), n_modes, tol):
            monos.append((coef, tuple((m // n_spins, m % n_spins, d) for m, d in factors)))
        return cls(n_sites, n_spins, tuple(monos))


Template = Union[np.ndarray, FermionTemplate]


def _maybe_real(m: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(m) and not np.any(m.imag):
        return np.ascontiguousarray(m.real)
    return m


def _kron_all(mats):
    out = np.eye(1)
    for m in mats:
        out = np.kron(out, m)
    return out


def named_spin_template(name: str, n_sites: int) -> np.ndarray:
    """Spin-1/2 templates; ``heisenberg`` is ``(1/4) sigma . sigma``."""
    single = {"sigma_x": "X", "sigma_y": "Y", "sigma_z": "Z"}
    if name in single:
        _expect_sites(name, n_sites, 1)
        return PAULI[single[name]].copy()
    if name == "ising_zz":
        _expect_sites(name, n_sites, 2)
        return np.kron(PAULI["Z"], PAULI["Z"])
    if name == "heisenberg":
        _expect_sites(name, n_sites, 2)
        m = sum(np.kron(PAULI[p], PAULI[p]) for p in "XYZ") / 4.0
        return _maybe_real(m)
    if name == "identity":
        return np.eye(2**n_sites)
    raise ValueError(f"unknown spin template {name!r}")


def _number_factors(site: int, n_spins: int):
    return [((site, s, True), (site, s, False)) for s in range(n_spins)]


def named_fermion_template(name: str, n_sites: int, n_spins: int) -> FermionTemplate:
    """Fermionic templates.

    ``hop`` carries the minus sign of the kinetic term, so a coefficient ``t``
    yields ``-t sum_s (c*_{1s} c_{0s} + c*_{0s} c_{1s})``.
    """
    monos: list = []
    if name == "number":
        _expect_sites(name, n_sites, 1)
        monos = [(1.0, f) for f in _number_factors(0, n_spins)]
    elif name == "hubbard_u":
        _expect_sites(name, n_sites, 1)
        if n_spins != 2:
            raise ValueError("hubbard_u needs exactly two spin states")
        monos = [(1.0, ((0, 0, True), (0, 0, False), (0, 1, True), (0, 1, False)))]
    elif name == "hop":
        _expect_sites(name, n_sites, 2)
        for s in range(n_spins):
            monos.append((-1.0, ((1, s, True), (0, s, False))))
            monos.append((-1.0, ((0, s, True), (1, s, False))))
    elif name == "density_density":
        _expect_sites(name, n_sites, 2)
        for a in _number_factors(0, n_spins):
            for b in _number_factors(1, n_spins):
                monos.append((1.0, a + b))
    else:
        raise ValueError(f"unknown fermion template {name!r}")
    return FermionTemplate(n_sites, n_spins, tuple(monos))


def _expect_sites(name, got, want):
    if got != want:
        raise ValueError(f"template {name!r} acts on {want} site(s), got {got}")


@dataclass(frozen=True)
class Term:
    """One operator template on the offset set ``offsets`` (which contains 0)."""

    offsets: tuple[Site, ...]
    template: Template
    coefficient: float = 1.0
    name: str = ""

    @property
    def size(self) -> int:
        return len(self.offsets)

    @property
    def is_single_site(self) -> bool:
        return len(self.offsets) == 1

    def class_key(self) -> tuple[Site, ...]:
        base = self.offsets[0]
        return tuple(tuple(a - b for a, b in zip(s, base)) for s in self.offsets)

    def local_matrix(self) -> np.ndarray:
        m = self.template.matrix() if isinstance(self.template, FermionTemplate) else self.template
        return self.coefficient * m


def _canonical_term(offsets, template, coefficient, name, site_kind) -> Term:
    offsets = [tuple(int(c) for c in o) for o in offsets]
    if len(set(offsets)) != len(offsets):
        raise ValueError("offsets must be distinct")
    if not any(all(c == 0 for c in o) for o in offsets):
        raise ValueError(f"offset set {offsets} must contain the origin")
    order = sorted(range(len(offsets)), key=lambda i: offsets[i])
    sorted_offsets = tuple(offsets[i] for i in order)
    if site_kind == SPIN_HALF:
        m = np.asarray(template)
        k = len(offsets)
        if m.shape != (2**k, 2**k):
            raise ValueError(f"template for {k} sites must be {2**k}x{2**k}, got {m.shape}")
        if not np.allclose(m, m.conj().T, atol=1e-12):
            raise ValueError("operator templates must be self-adjoint")
        if order != list(range(k)):
            t = m.reshape((2,) * (2 * k))
            t = t.transpose(order + [k + i for i in order])
            m = t.reshape(2**k, 2**k)
        template = _maybe_real(np.array(m))
    else:
        if order != list(range(len(offsets))):
            template = template.remap_sites(order)
        local = template.matrix()
        if not np.allclose(local, local.conj().T, atol=1e-12):
            raise ValueError("operator templates must be self-adjoint")
    return Term(sorted_offsets, template, float(coefficient), name)


@dataclass(frozen=True)
class Interaction:
    """Translation-invariant interaction ``{phi_X}`` given by per-class templates."""

    dimension: int
    site_kind: str
    terms: tuple[Term, ...] = ()
    spins: tuple[str, ...] = ()
    declared_range: int | None = None
    unbounded: bool = False

    def __post_init__(self):
        if self.site_kind not in SITE_KINDS:
            raise ValueError(f"site_kind must be one of {SITE_KINDS}")
        if self.site_kind == FERMION and not 1 <= len(self.spins) <= 2:
            raise ValueError("fermions need one or two spin states")
        if self.declared_range is not None:
            for t in self.terms:
                if diameter(t.offsets) > self.declared_range:
                    raise ValueError(f"term {t.name or t.offsets} exceeds declared range {self.declared_range}")

    @classmethod
    def build(
        cls,
        dimension: int,
        site_kind: str,
        terms: Iterable[tuple],
        spins: Sequence[str] = (),
        declared_range: int | None = None,
    ) -> "Interaction":
        """Build from ``(offsets, template_or_name, coefficient)`` triples."""
        spins = tuple(spins) if site_kind == FERMION else ()
        if site_kind == FERMION and not spins:
            spins = ("up", "down")
        out = []
        for item in terms:
            offsets, op, coef = item[0], item[1], item[2] if len(item) > 2 else 1.0
            offsets = [tuple(o) if isinstance(o, (list, tuple)) else (int(o),) for o in offsets]
            name = op if isinstance(op, str) else ""
            if isinstance(op, str):
                if site_kind == SPIN_HALF:
                    op = named_spin_template(op, len(offsets))
                else:
                    op = named_fermion_template(op, len(offsets), len(spins))
            elif site_kind == FERMION and not isinstance(op, FermionTemplate):
                op = FermionTemplate.from_matrix(op, len(offsets), len(spins))
            out.append(_canonical_term(offsets, op, coef, name, site_kind))
        return cls(dimension, site_kind, tuple(out), spins, declared_range)

    @property
    def n_spins(self) -> int:
        return len(self.spins) if self.site_kind == FERMION else 1

    @property
    def local_dim(self) -> int:
        return 2 if self.site_kind == SPIN_HALF else 2 ** len(self.spins)

    @property
    def range(self) -> int | None:
        """Declared range, else the largest term diameter; ``None`` if unbounded."""
        if self.unbounded:
            return None
        if self.declared_range is not None:
            return self.declared_range
        return max((diameter(t.offsets) for t in self.terms), default=0)

    @property
    def is_single_site(self) -> bool:
        return all(t.is_single_site for t in self.terms)

    def scaled(self, factor: float) -> "Interaction":
        terms = tuple(Term(t.offsets, t.template, factor * t.coefficient, t.name) for t in self.terms)
        return Interaction(self.dimension, self.site_kind, terms, self.spins, self.declared_range, self.unbounded)

    def __add__(self, other: "Interaction") -> "Interaction":
        if (self.dimension, self.site_kind, self.spins) != (other.dimension, other.site_kind, other.spins):
            raise ValueError("cannot add interactions on different lattices")
        r = None
        if self.declared_range is not None and other.declared_range is not None:
            r = max(self.declared_range, other.declared_range)
        return Interaction(
            self.dimension, self.site_kind, self.terms + other.terms, self.spins, r, self.unbounded or other.unbounded
        )

    def classes(self) -> dict[tuple[Site, ...], list[Term]]:
        out: dict[tuple[Site, ...], list[Term]] = {}
        for t in self.terms:
            out.setdefault(t.class_key(), []).append(t)
        return out

    def class_norms(self) -> dict[tuple[Site, ...], float]:
        """Operator norm of the summed template in each translation class."""
        out = {}
        for key, terms in self.classes().items():
            m = sum(t.local_matrix() for t in terms)
            out[key] = operator_norm(m)
        return out


def operator_norm(m) -> float:
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    if np.allclose(m, m.conj().T, atol=1e-12):
        return float(np.max(np.abs(np.linalg.eigvalsh(m))))
    return float(np.linalg.norm(m, 2))


# ---------------------------------------------------------------------------
# JSON description


def _parse_entry(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)


def interaction_from_dict(data: dict) -> Interaction:
    """Parse the interaction description format.

    Operators are either a named template or an explicit matrix whose entries
    are numbers, ``[re, im]`` pairs or strings such as ``"1-2j"``.
    """
    try:
        dimension = int(data["dimension"])
        kind = data["site_kind"]
        raw_terms = data["terms"]
    except KeyError as exc:
        raise ValueError(f"interaction description lacks {exc.args[0]!r}") from None
    spins = tuple(data.get("spins", ("up", "down") if kind == FERMION else ()))
    terms = []
    for t in raw_terms:
        op = t["operator"]
        if not isinstance(op, str):
            op = np.array([[_parse_entry(v) for v in row] for row in op])
            op = _maybe_real(op)
        terms.append((t["offsets"], op, float(t.get("coefficient", 1.0))))
    rng = data.get("range")
    unbounded = rng in ("unbounded", "inf", "infinite")
    inter = Interaction.build(dimension, kind, terms, spins, None if unbounded or rng is None else int(rng))
    if unbounded:
        inter = Interaction(inter.dimension, inter.site_kind, inter.terms, inter.spins, None, True)
    return inter


def interaction_to_dict(inter: Interaction) -> dict:
    terms = []
    for t in inter.terms:
        if t.name:
            op = t.name
        else:
            m = t.local_matrix() / (t.coefficient or 1.0)
            op = [[[float(np.real(v)), float(np.imag(v))] for v in row] for row in m]
        terms.append({"offsets": [list(o) for o in t.offsets], "operator": op, "coefficient": t.coefficient})
    out = {"dimension": inter.dimension, "site_kind": inter.site_kind, "terms": terms}
    if inter.site_kind == FERMION:
        out["spins"] = list(inter.spins)
    out["range"] = "unbounded" if inter.unbounded else inter.range
    return out


# ---------------------------------------------------------------------------
# translates


Placement = tuple[tuple[Site, ...], Term]


def terms_in(interaction: Interaction, region: Region) -> list[Placement]:
    """Every translate ``X + x`` contained in ``region``, with its term.

    Ordered by term, then by the image of the first offset.
    """
    out: list[Placement] = []
    for term in interaction.terms:
        first = term.offsets[0]
        for site in region.sites:
            shift = tuple(a - b for a, b in zip(site, first))
            placed = tuple(tuple(a + b for a, b in zip(o, shift)) for o in term.offsets)
            if all(p in region for p in placed):
                out.append((placed, term))
    return out


def boundary_terms(interaction: Interaction, region: Region, ambient: Region) -> list[Placement]:
    """Translates inside ``ambient`` that meet both ``region`` and its complement."""
    if not region.issubset(ambient):
        raise ValueError("region must be contained in the ambient region")
    out = []
    for placed, term in terms_in(interaction, ambient):
        inside = sum(p in region for p in placed)
        if 0 < inside < len(placed):
            out.append((placed, term))
    return out


# ---------------------------------------------------------------------------
# norms


def f_r(R: int, s: float) -> float:
    """``F_R(s)`` exactly as printed, including the ``e^{kR}`` in the sum."""
    total = (-R + 1) * s + 2.0 * sum((math.exp(k * R) - 1.0) / k for k in range(1, R + 1))
    return math.exp(total)


@dataclass(frozen=True)
class NormReport:
    lam: float
    norm_lambda: float
    norm_zero: float
    s_phi: float
    f_r_value: float
    h1_margin: float
    range: int | None
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "norm_lambda": self.norm_lambda,
            "norm_zero": self.norm_zero,
            "s_phi": self.s_phi,
            "f_r_value": self.f_r_value,
            "h1_margin": self.h1_margin,
            "range": self.range,
            "notes": list(self.notes),
        }


def norm_lambda(interaction: Interaction, lam: float) -> float:
    """``sum_{X containing 0} ||phi_X|| exp(lam |X|)``; a class of size k has k translates through 0."""
    return sum(len(k) * v * math.exp(lam * len(k)) for k, v in interaction.class_norms().items())


def norm_zero(interaction: Interaction) -> float:
    return sum(len(k) * v for k, v in interaction.class_norms().items())


def s_phi(interaction: Interaction) -> float:
    """``|| sum_{X containing 0} phi_X / diam(X) ||`` on the joint support.

    Single-site terms have diameter 0 and are left out of the sum.
    """
    from .operators import assemble_placements

    placements = []
    for term in interaction.terms:
        if term.is_single_site:
            continue
        d = diameter(term.offsets)
        for anchor in term.offsets:
            shift = tuple(-c for c in anchor)
            placed = tuple(tuple(a + b for a, b in zip(o, shift)) for o in term.offsets)
            placements.append((placed, Term(term.offsets, term.template, term.coefficient / d, term.name)))
    if not placements:
        return 0.0
    support = Region.from_sites({p for placed, _ in placements for p in placed}, interaction.dimension)
    op = assemble_placements(interaction, placements, support)
    return operator_norm(op)


def norms(interaction: Interaction, lam: float) -> NormReport:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    nl = norm_lambda(interaction, lam)
    n0 = norm_zero(interaction)
    notes = []
    R = interaction.range
    if R is None:
        s, fr = math.nan, math.nan
        notes.append("unbounded range: S(Phi) and F_R undefined")
    else:
        s = s_phi(interaction)
        fr = f_r(R, 2 * s) if R >= 1 else math.nan
    return NormReport(lam, nl, n0, s, fr, lam / 4.0 * nl, R, tuple(notes))


# ---------------------------------------------------------------------------
# block decomposition


@dataclass(frozen=True)
class BlockDecomposition:
    L: int
    a: int
    n: int
    b: int
    dimension: int
    region: Region
    blocks: tuple[Region, ...]
    rest: Region
    crossing_sets: tuple[Placement, ...] | None = None

    @property
    def parts(self) -> tuple[Region, ...]:
        return self.blocks + (self.rest,)

    def crossing_terms(self, interaction: Interaction) -> list[Placement]:
        """Translates inside the cube that straddle some block or the rest."""
        out = []
        for placed, term in terms_in(interaction, self.region):
            for part in self.parts:
                inside = sum(p in part for p in placed)
                if 0 < inside < len(placed):
                    out.append((placed, term))
                    break
        return out

    def rest_terms(self, interaction: Interaction) -> list[Placement]:
        return terms_in(interaction, self.rest) if len(self.rest) else []


def decompose(region: Region, a: int, interaction: Interaction | None = None) -> BlockDecomposition:
    """Split an ``L``-cube into ``n^d`` adjacent ``a``-cubes plus a rest, ``L = n a + b``."""
    L = region.cube_side()
    if L is None:
        raise ValueError("region is not a hypercube")
    if not 1 <= a <= L:
        raise ValueError(f"block side must satisfy 1 <= a <= L = {L}")
    d = region.dimension
    n, b = divmod(L, a)
    origin = tuple(min(s[k] for s in region.sites) for k in range(d))
    blocks = []
    for j in itertools.product(range(n), repeat=d):
        corner = tuple(o + jj * a for o, jj in zip(origin, j))
        blocks.append(Region.cube(a, d, corner))
    covered = set().union(*(set(bk.sites) for bk in blocks))
    rest = Region(d, tuple(s for s in region.sites if s not in covered))
    dec = BlockDecomposition(L, a, n, b, d, region, tuple(blocks), rest)
    if interaction is not None:
        dec = BlockDecomposition(L, a, n, b, d, region, tuple(blocks), rest, tuple(dec.crossing_terms(interaction)))
    return dec
