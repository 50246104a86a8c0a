"""Numerical checks of the trace inequalities, analyticity bounds and block estimates.

Every verifier returns a :class:`BoundReport` with ``lhs``, ``rhs`` and the
grid it was evaluated on. Suprema over ``(t, s)`` are taken on a uniform
grid and on its 2x refinement; the refined value plus the change between
the two grids is the certified right-hand side.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from . import gibbs
from .certificates import alpha_window
from .lattice import (
    Interaction,
    Region,
    decompose,
    interaction_to_dict,
    norm_lambda,
    norm_zero,
    operator_norm,
    terms_in,
)
from .operators import AssembledOperator, assemble, assemble_placements, embed, local_operator, macro_observable

SLACK = 1e-9


@dataclass(frozen=True)
class BoundReport:
    name: str
    lhs: float
    rhs: float
    passed: bool
    slack: float = SLACK
    grid: dict = field(default_factory=dict)
    worst: tuple | None = None
    details: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        out = asdict(self)
        out["margin"] = self.margin
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def _report(name, lhs, rhs, slack=SLACK, **kw) -> BoundReport:
    return BoundReport(name, float(lhs), float(rhs), bool(lhs <= rhs + slack), slack, **kw)


# ---------------------------------------------------------------------------
# random instances


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (g + g.conj().T) / (2.0 * math.sqrt(n))


def random_positive(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """``e^{X}`` for a random Hermitian ``X``."""
    w, v = np.linalg.eigh(random_hermitian(n, rng, scale))
    return (v * np.exp(w)) @ v.conj().T


def _hermitian(m, what):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be square")
    if np.max(np.abs(m - m.conj().T)) > 1e-12 * max(1.0, float(np.max(np.abs(m)))):
        raise ValueError(f"{what} must be Hermitian")
    return m


def _log_trace_exp(h: np.ndarray, c: np.ndarray | None = None) -> float:
    """``log tr(C e^{h})`` with the exponent shifted by its largest eigenvalue."""
    w, v = np.linalg.eigh(h)
    if c is None:
        return float(logsumexp(w))
    top = w[-1]
    diag = np.real(np.einsum("ij,ji->i", v.conj().T, c @ v))
    return float(top + np.log(np.dot(diag, np.exp(w - top))))


# ---------------------------------------------------------------------------
# two-part trace lemma


def lemma_part1(H, P) -> BoundReport:
    """``|log tr e^{H+P} - log tr e^H| <= ||P||``."""
    H, P = _hermitian(H, "H"), _hermitian(P, "P")
    if H.shape != P.shape:
        raise ValueError("H and P have different dimensions")
    lhs = abs(_log_trace_exp(H + P) - _log_trace_exp(H))
    return _report("lemma_part1", lhs, operator_norm(P), grid={"n": H.shape[0]})


def conjugation_sup(H, P, n_t: int = 129, n_s: int = 129) -> np.ndarray:
    """``||e^{-s(H+tP)} P e^{s(H+tP)}||`` on the ``t in [0,1]`` by ``s in [-1/2,1/2]`` grid."""
    ts = np.linspace(0.0, 1.0, n_t)
    ss = np.linspace(-0.5, 0.5, n_s)
    g, v = np.linalg.eigh(H[None] + ts[:, None, None] * P[None])
    pt = np.conj(np.swapaxes(v, 1, 2)) @ P[None] @ v
    diff = g[:, :, None] - g[:, None, :]
    out = np.empty((n_t, n_s))
    for i in range(n_t):
        m = pt[i][None] * np.exp(-ss[:, None, None] * diff[i][None])
        gram = np.conj(np.swapaxes(m, 1, 2)) @ m
        out[i] = np.sqrt(np.maximum(np.linalg.eigvalsh(gram)[:, -1], 0.0))
    return out


def lemma_part2(H, P, C, n_coarse: int = 65) -> BoundReport:
    """``|log tr(C e^{H+P}) - log tr(C e^H)| <= sup_{t,s} ||U^{-s}(t) P U^s(t)||``.

    The supremum is sampled on an ``n_coarse`` grid and on its refinement
    with ``2 n_coarse - 1`` points per axis (the coarse grid is a subgrid).
    """
    H, P, C = _hermitian(H, "H"), _hermitian(P, "P"), _hermitian(C, "C")
    if not (H.shape == P.shape == C.shape):
        raise ValueError("H, P and C have different dimensions")
    if n_coarse < 33:
        raise ValueError("grids need at least 33 points per axis")
    if np.linalg.eigvalsh(C)[0] <= 0:
        raise ValueError("C must be positive definite")
    lhs = abs(_log_trace_exp(H + P, C) - _log_trace_exp(H, C))
    n_fine = 2 * n_coarse - 1
    vals = conjugation_sup(H, P, n_fine, n_fine)
    fine = float(vals.max())
    coarse = float(vals[::2, ::2].max())
    refined = fine + abs(fine - coarse)
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    worst = (float(i / (n_fine - 1)), float(-0.5 + j / (n_fine - 1)))
    return _report(
        "lemma_part2",
        lhs,
        refined,
        grid={"n": H.shape[0], "t_points": n_fine, "s_points": n_fine, "coarse_points": n_coarse},
        worst=worst,
        details={"rhs_raw": fine, "rhs_coarse": coarse},
    )


def lemma_suite(part: int, n_instances: int = 200, n: int = 8, seed: int = 0, n_coarse: int = 65) -> list[BoundReport]:
    """Random instances: ``H, P`` Hermitian, ``C = e^{X}``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_instances):
        H = random_hermitian(n, rng, 2.0)
        P = random_hermitian(n, rng, rng.uniform(0.1, 2.0))
        if part == 1:
            out.append(lemma_part1(H, P))
        else:
            out.append(lemma_part2(H, P, random_positive(n, rng), n_coarse))
    return out


# ---------------------------------------------------------------------------
# Ruelle strip estimate


def weighted_hamiltonian(
    interaction: Interaction, region: Region, u: Mapping | Callable | None = None
) -> np.ndarray:
    """``sum_X u_X phi_X`` with caller weights in ``[0, 1]``; ``None`` means all ones."""
    placements = terms_in(interaction, region)
    if u is None:
        return assemble_placements(interaction, placements, region)
    weighted = []
    for placed, term in placements:
        w = u(placed) if callable(u) else u.get(placed, 1.0)
        if not 0.0 <= w <= 1.0:
            raise ValueError("weights u_X must lie in [0, 1]")
        weighted.append((placed, type(term)(term.offsets, term.template, w * term.coefficient, term.name)))
    return assemble_placements(interaction, weighted, region)


def strip_half_width(interaction: Interaction, lam: float) -> float:
    n = norm_lambda(interaction, lam)
    return math.inf if n == 0 else 2.0 / (lam * n)


def _evolved_norms(spec: gibbs.SpectralDecomposition, a: np.ndarray, zs) -> np.ndarray:
    at = spec.to_eigenbasis(a)
    e = spec.eigenvalues
    diff = e[:, None] - e[None, :]
    return np.array([np.linalg.norm(np.exp(1j * z * diff) * at, 2) for z in zs])


def ruelle_bound(
    interaction: Interaction,
    lam: float,
    observable: AssembledOperator,
    region: Region,
    z_grid: Sequence[complex],
    u: Mapping | Callable | None = None,
) -> BoundReport:
    """``||e^{izH} A e^{-izH}|| <= ||A|| e^{lam |X|} / (1 - |Im z| (lam/2) ||Phi||_lam)`` on a grid."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    width = strip_half_width(interaction, lam)
    zs = np.asarray(z_grid, dtype=complex)
    if np.any(np.abs(zs.imag) > width):
        raise ValueError(f"z outside the strip |Im z| <= {width:.4g}")
    nl = norm_lambda(interaction, lam)
    a_norm = operator_norm(observable.matrix)
    support = len(observable.region)
    a = embed(observable, region).matrix
    h = weighted_hamiltonian(interaction, region, u)
    spec = gibbs.spectral(h, label="H")
    lhs = _evolved_norms(spec, a, zs)
    denom = 1.0 - np.abs(zs.imag) * lam / 2.0 * nl
    rhs = np.where(denom > 0, a_norm * math.exp(lam * support) / np.where(denom > 0, denom, 1.0), np.inf)
    margins = rhs - lhs
    k = int(np.argmin(margins))
    return BoundReport(
        "ruelle_bound",
        float(lhs[k]),
        float(rhs[k]),
        bool(np.all(lhs <= rhs + SLACK)),
        SLACK,
        grid={"points": len(zs), "L": len(region), "strip": width},
        worst=(float(zs[k].real), float(zs[k].imag)),
        details={"lhs": lhs.tolist(), "rhs": rhs.tolist(), "norm_lambda": nl},
    )


def imaginary_time_norms(interaction: Interaction, local: AssembledOperator, lengths: Sequence[int], s_values: Sequence[float], centre: bool = True) -> dict[int, float]:
    """``max_s ||e^{-sH} A e^{sH}||`` for chains of each length, ``A`` placed at the centre."""
    out = {}
    for L in lengths:
        region = Region.chain(L)
        shift = (L - 1) // 2 if centre else 0
        placed = local_operator(local.matrix, [(s[0] + shift,) for s in local.region.sites], local.site_kind, local.n_spins)
        spec = gibbs.spectral(assemble(interaction, region).matrix, label="H")
        out[L] = float(np.max(_evolved_norms(spec, embed(placed, region).matrix, [1j * s for s in s_values])))
    return out


def analytic_admissible(theta: float, h: float, s_phi: float) -> tuple[float, bool]:
    """``theta' = theta e^{4 h S(Phi)}`` and whether it stays below 1."""
    tp = theta * math.exp(4.0 * h * s_phi)
    return tp, tp < 1.0


# ---------------------------------------------------------------------------
# localization tails


@dataclass(frozen=True)
class ThetaNormReport:
    theta: float
    n_max: int
    tail_upper: tuple[float, ...]
    tail_lower: tuple[float, ...]
    norm_inverse_weight: float
    norm_direct_weight: float
    truncated: bool

    @property
    def tails(self) -> tuple[float, ...]:
        return self.tail_upper

    def to_dict(self) -> dict:
        return asdict(self)


def compress(a: np.ndarray, n_max: int, n: int) -> np.ndarray:
    """Normalized partial trace onto ``[-n, n]`` inside the window ``[-n_max, n_max]``, tensored with identities."""
    side = n_max - n
    lo = 2**side
    mid = 2 ** (2 * n + 1)
    a6 = a.reshape(lo, mid, lo, lo, mid, lo)
    red = np.einsum("imjiMj->mM", a6) / (lo * lo)
    return np.kron(np.kron(np.eye(lo), red), np.eye(lo))


def theta_norms(a, theta: float, n_max: int) -> ThetaNormReport:
    """Localization tails of a spin-1/2 operator on ``[-n_max, n_max]``.

    ``tail[0] = ||A||``; for ``n >= 1`` the upper value is ``||A - E_n A||``
    with ``E_n`` the normalized partial trace onto ``[-n, n]``. Since
    ``E_n`` is a unital contraction fixing the local algebra, the true
    infimum lies in ``[upper / 2, upper]``. Both series weightings
    ``theta^-n`` and ``theta^n`` are summed.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    m = a.matrix if isinstance(a, AssembledOperator) else np.asarray(a)
    if m.shape != (2 ** (2 * n_max + 1),) * 2:
        raise ValueError("operator does not match the window")
    upper = [operator_norm(m)]
    for n in range(1, n_max + 1):
        upper.append(min(upper[-1], operator_norm(m - compress(m, n_max, n))))
    upper = [0.0 if u < 1e-13 * max(1.0, upper[0]) else u for u in upper]
    lower = [upper[0]] + [u / 2.0 for u in upper[1:]]
    ns = np.arange(n_max + 1)
    inv = float(np.sum(theta ** (-ns) * np.array(upper)))
    direct = float(np.sum(theta**ns * np.array(upper)))
    return ThetaNormReport(theta, n_max, tuple(upper), tuple(lower), inv, direct, upper[-1] > 0)


# ---------------------------------------------------------------------------
# block estimate for the moment generating function


def _interaction_key(inter: Interaction) -> str:
    return json.dumps(interaction_to_dict(inter), sort_keys=True, default=str)


def log_trace_pair_normalized(phi: Interaction, psi: Interaction, region: Region, alpha: float, cache=gibbs.DEFAULT_CACHE) -> float:
    """``|region|^-1 log tr(e^{alpha K} e^{-H})`` with the normalized trace."""
    key = ("block-state", _interaction_key(phi), region.sites)
    state = cache.get(key, lambda: gibbs.gibbs_state(assemble(phi, region), 1.0, convention=gibbs.NORMALIZED))
    k = macro_observable(psi, region)
    return float(gibbs.mgf(state, k, [alpha]).g[0])


def _summed_weight(interaction: Interaction, placements, lam: float) -> float:
    grouped: dict = {}
    for placed, term in placements:
        grouped[placed] = grouped.get(placed, 0) + term.local_matrix()
    return float(sum(operator_norm(m) * math.exp(lam * len(p)) for p, m in grouped.items()))


def subadditivity_gap(
    phi: Interaction,
    psi: Interaction,
    beta: float,
    alpha: float,
    L: int,
    a: int,
    lam: float,
    cache=gibbs.DEFAULT_CACHE,
) -> BoundReport:
    """Compare ``|g_L(alpha) - (na/L) g_a(alpha)|`` with the block estimate.

    ``g`` uses the normalized trace and ``e^{-beta H}``; all norms refer to
    ``beta Phi``. ``details`` holds both variants of the second prefactor
    (``Psi`` norm, the primary one, and ``Phi`` norm).
    """
    if phi.dimension != 1:
        raise ValueError("the block estimate is implemented for chains")
    phib = phi.scaled(beta)
    m_phi = lam / 4.0 * norm_lambda(phib, lam)
    if m_phi >= 1.0:
        raise ValueError(f"(lam/4)||beta Phi||_lam = {m_phi:.4g} >= 1")
    if abs(alpha) >= alpha_window(psi, lam):
        raise ValueError(f"|alpha| = {abs(alpha)} is outside the admissible window")
    region = Region.chain(L)
    dec = decompose(region, a)
    g_big = log_trace_pair_normalized(phib, psi, region, alpha, cache)
    g_block = log_trace_pair_normalized(phib, psi, dec.blocks[0], alpha, cache)
    lhs = abs(g_big - (dec.n * a / L) * g_block)

    rest_phi = dec.rest_terms(phib)
    cross_phi = dec.crossing_terms(phib)
    first = _summed_weight(phib, rest_phi + cross_phi, lam) / (1.0 - m_phi) / L
    if psi.is_single_site:
        second_psi = second_phi = abs(alpha) * len(dec.rest) * norm_zero(psi) / L
    else:
        sums = _summed_weight(psi, dec.rest_terms(psi) + dec.crossing_terms(psi), lam) / L
        d_psi = 1.0 - abs(alpha) * lam / 4.0 * norm_lambda(psi, lam)
        d_phi = 1.0 - abs(alpha) * m_phi
        second_psi = abs(alpha) * sums / d_psi
        second_phi = abs(alpha) * sums / d_phi if d_phi > 0 else math.inf
    rhs_psi = first + second_psi
    rhs_phi = first + second_phi
    return BoundReport(
        "subadditivity_gap",
        lhs,
        rhs_psi,
        bool(lhs <= rhs_psi + SLACK and lhs <= rhs_phi + SLACK),
        SLACK,
        grid={"L": L, "a": a, "n": dec.n, "b": dec.b},
        details={
            "g_L": g_big,
            "g_block": g_block,
            "rhs_psi_prefactor": rhs_psi,
            "rhs_phi_prefactor": rhs_phi,
            "first_term": first,
            "h1_margin": m_phi,
        },
    )


# ---------------------------------------------------------------------------
# state expectation vs trace ratio


@dataclass(frozen=True)
class DiscrepancyReport:
    inner: int
    outer: int
    alpha: float
    log_omega: float
    log_ratio: float

    @property
    def d(self) -> float:
        return abs(self.log_omega - self.log_ratio) / self.inner

    def to_dict(self) -> dict:
        out = asdict(self)
        out["d"] = self.d
        return out


def omega_vs_trace_ratio(
    phi: Interaction,
    psi: Interaction,
    beta: float,
    alpha: float,
    inner: Region | int,
    outer: Region | int,
    cache=gibbs.DEFAULT_CACHE,
) -> DiscrepancyReport:
    """``|Lam|^-1 |log omega_V(e^{alpha K_Lam}) - log tr(e^{alpha K} e^{-H_Lam}) / tr e^{-H_Lam}|``.

    Integers are chain lengths; the inner chain is centred in the outer one.
    ``omega_V`` is the Gibbs state of ``beta Phi`` on ``V``.
    """
    if isinstance(outer, int):
        outer = Region.chain(outer)
    if isinstance(inner, int):
        start = min(s[0] for s in outer.sites) + (len(outer) - inner) // 2
        inner = Region.chain(inner, start)
    if not inner.issubset(outer):
        raise ValueError("the inner region must lie inside the outer one")
    phib = phi.scaled(beta)
    key = _interaction_key(phib)
    big = cache.get(("block-state", key, outer.sites), lambda: gibbs.gibbs_state(assemble(phib, outer), 1.0, convention=gibbs.NORMALIZED))
    small = cache.get(("block-state", key, inner.sites), lambda: gibbs.gibbs_state(assemble(phib, inner), 1.0, convention=gibbs.NORMALIZED))
    k_outer = macro_observable(psi, inner, ambient=outer)
    k_inner = macro_observable(psi, inner)
    lo = float(gibbs.log_expectation_exp(big, k_outer, [alpha])[0])
    lr = float(gibbs.log_expectation_exp(small, k_inner, [alpha])[0])
    return DiscrepancyReport(len(inner), len(outer), alpha, lo, lr)
