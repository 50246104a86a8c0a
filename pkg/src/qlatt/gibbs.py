"""Spectral core: eigendecompositions, finite-volume Gibbs states and moment generating functions.

All traces involving two non-commuting exponentials are evaluated in the
eigenbases of both operators::

    tr(e^{aK} e^{-H}) = sum_{jk} e^{a k_j} |<k_j|h_k>|^2 e^{-h_k}

with the sums carried out in log space.
"""
from __future__ import annotations

import logging
import os
import threading
import warnings
from dataclasses import dataclass
from typing import Callable, Hashable, Sequence

import numpy as np
from scipy.special import logsumexp

from .lattice import Interaction, Region
from .operators import AssembledOperator, assemble

log = logging.getLogger(__name__)

DEFAULT_MAX_DIM = 8192
ORDINARY = "ordinary"
NORMALIZED = "normalized"
CONVENTIONS = (ORDINARY, NORMALIZED)
RESIDUAL_TOL = 1e-10
ORTHO_TOL = 1e-11
CONDITIONING_LIMIT = 1e12


class SpectralError(RuntimeError):
    """An eigendecomposition failed its post-hoc residual checks."""


class ConditioningWarning(UserWarning):
    pass


def max_dim() -> int:
    raw = os.environ.get("QLATT_MAX_DIM")
    if raw is None:
        return DEFAULT_MAX_DIM
    value = int(raw)
    if value != DEFAULT_MAX_DIM:
        warnings.warn(f"QLATT_MAX_DIM overrides the dense cap: {value}", stacklevel=2)
    return value


def _matrix(op) -> np.ndarray:
    return op.matrix if isinstance(op, AssembledOperator) else np.asarray(op)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    label: str = ""
    diagonal: bool = False

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.dim else 0.0

    def apply(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """``V fn(eigenvalues) V^*``."""
        v = self.eigenvectors
        return (v * fn(self.eigenvalues)) @ v.conj().T

    def exp(self, scale: complex = 1.0) -> np.ndarray:
        return self.apply(lambda x: np.exp(scale * x))

    def to_eigenbasis(self, m: np.ndarray) -> np.ndarray:
        v = self.eigenvectors
        if self.diagonal:
            perm = np.argmax(np.abs(v), axis=0)
            return m[np.ix_(perm, perm)]
        return v.conj().T @ m @ v

    def from_eigenbasis(self, m: np.ndarray) -> np.ndarray:
        v = self.eigenvectors
        return v @ m @ v.conj().T


def _is_diagonal(m: np.ndarray) -> bool:
    return not np.any(m[~np.eye(m.shape[0], dtype=bool)]) if m.shape[0] <= 4096 else np.count_nonzero(m) == np.count_nonzero(np.diag(m))


def spectral(op, label: str = "", sectors: np.ndarray | None = None, check: bool = True) -> SpectralDecomposition:
    """Hermitian eigendecomposition with ascending eigenvalues.

    ``sectors`` assigns a conserved label to each basis vector; the matrix
    must not couple different labels, and each block is diagonalized on its
    own. The result is checked for ``||M v - t v|| <= 1e-10 ||M||`` and
    ``V^* V = 1`` to ``1e-11``; failures raise :class:`SpectralError`.
    """
    m = _matrix(op)
    label = label or getattr(op, "label", "")
    dim = m.shape[0]
    if dim > max_dim():
        raise SpectralError(f"dimension {dim} exceeds the dense cap {max_dim()} (set QLATT_MAX_DIM)")
    if m.size and np.max(np.abs(m - m.conj().T)) > 1e-12 * max(1.0, float(np.max(np.abs(m)))):
        raise ValueError("spectral decomposition needs a Hermitian matrix")
    if _is_diagonal(m):
        d = np.real(np.diag(m))
        order = np.argsort(d, kind="stable")
        v = np.zeros((dim, dim))
        v[order, np.arange(dim)] = 1.0
        return SpectralDecomposition(d[order], v, label, diagonal=True)
    if sectors is not None:
        sectors = np.asarray(sectors)
        evals = np.empty(dim)
        v = np.zeros_like(m)
        mask = sectors[:, None] != sectors[None, :]
        if np.any(m[mask]):
            raise ValueError("matrix couples different sectors")
        col = 0
        for s in np.unique(sectors):
            idx = np.flatnonzero(sectors == s)
            w, u = np.linalg.eigh(m[np.ix_(idx, idx)])
            evals[col : col + len(idx)] = w
            v[idx, col : col + len(idx)] = u
            col += len(idx)
        order = np.argsort(evals, kind="stable")
        evals, v = evals[order], v[:, order]
    else:
        evals, v = np.linalg.eigh(m)
    dec = SpectralDecomposition(evals, v, label)
    if check:
        _check(m, dec)
    return dec


def _check(m: np.ndarray, dec: SpectralDecomposition) -> None:
    v, w = dec.eigenvectors, dec.eigenvalues
    scale = max(dec.norm, np.finfo(float).tiny)
    resid = np.max(np.abs(m @ v - v * w)) if m.size else 0.0
    if resid > RESIDUAL_TOL * scale:
        raise SpectralError(f"{dec.label}: eigen-residual {resid:.3e} exceeds {RESIDUAL_TOL:g} ||M||")
    ortho = np.max(np.abs(v.conj().T @ v - np.eye(dec.dim))) if m.size else 0.0
    if ortho > ORTHO_TOL:
        raise SpectralError(f"{dec.label}: eigenvectors not orthonormal ({ortho:.3e})")


class SpectralCache:
    """Decompositions keyed by (model, volume, beta, mu, ...).

    Reads go straight to the dict; inserts happen under a lock and the first
    writer wins, so concurrent callers always share one decomposition.
    """

    def __init__(self):
        self._data: dict[Hashable, object] = {}
        self._lock = threading.Lock()

    def get(self, key: Hashable, compute: Callable[[], object]):
        hit = self._data.get(key)
        if hit is not None:
            return hit
        value = compute()
        with self._lock:
            return self._data.setdefault(key, value)

    def __len__(self):
        return len(self._data)

    def clear(self):
        with self._lock:
            self._data.clear()


DEFAULT_CACHE = SpectralCache()


# ---------------------------------------------------------------------------
# Gibbs states


@dataclass(frozen=True, eq=False)
class GibbsState:
    """Finite-volume state ``rho = e^{-H_eff} / tr e^{-H_eff}`` with ``H_eff = beta (H - mu N)``."""

    region: Region
    spectrum: SpectralDecomposition
    generator: np.ndarray
    beta: float = 1.0
    mu: float | None = None
    convention: str = ORDINARY

    @property
    def volume(self) -> int:
        return len(self.region)

    @property
    def dim(self) -> int:
        return self.spectrum.dim

    @property
    def log_z(self) -> float:
        """``log tr e^{-H_eff}`` with the ordinary trace."""
        return float(logsumexp(-self.spectrum.eigenvalues))

    @property
    def log_partition(self) -> float:
        """``log tr e^{-H_eff}`` in the state's trace convention."""
        return self.log_z - (np.log(self.dim) if self.convention == NORMALIZED else 0.0)

    @property
    def pressure(self) -> float:
        return self.log_partition / self.volume

    @property
    def weights(self) -> np.ndarray:
        """Boltzmann weights of the eigenvectors of ``H_eff``."""
        e = self.spectrum.eigenvalues
        return np.exp(-(e - e[0]) - logsumexp(-(e - e[0])))

    def density_matrix(self) -> np.ndarray:
        return self.spectrum.apply(lambda e: np.exp(-(e - e[0]) - logsumexp(-(e - e[0]))))

    def expect(self, op) -> complex | float:
        m = _matrix(op)
        v = self.spectrum.eigenvectors
        diag = np.einsum("ij,ij->j", v.conj(), m @ v)
        val = np.dot(self.weights, diag)
        return float(val.real) if abs(val.imag) < 1e-13 * max(1.0, abs(val)) else complex(val)


def gibbs_state(
    hamiltonian,
    beta: float = 1.0,
    mu: float | None = None,
    number=None,
    convention: str = ORDINARY,
    sectors: np.ndarray | None = None,
    region: Region | None = None,
) -> GibbsState:
    """Grand-canonical (or plain, when ``mu`` is None) Gibbs state of a Hermitian operator.

    ``hamiltonian`` may be an :class:`AssembledOperator` or a bare matrix
    (then ``region`` should be given, or a one-site placeholder is used).
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    h = _matrix(hamiltonian)
    if isinstance(hamiltonian, AssembledOperator):
        region = hamiltonian.region
        if not hamiltonian.hermitian:
            raise ValueError("Gibbs states need a Hermitian Hamiltonian")
    elif region is None:
        region = Region.chain(1)
    if h.size and np.max(np.abs(h - h.conj().T)) > 1e-12 * max(1.0, float(np.max(np.abs(h)))):
        raise ValueError("Gibbs states need a Hermitian Hamiltonian")
    gen = beta * h
    if mu is not None and mu != 0.0:
        if number is None:
            raise ValueError("a chemical potential needs the number operator")
        gen = gen - beta * mu * _matrix(number)
    spec = spectral(gen, label="H_eff", sectors=sectors)
    return GibbsState(region, spec, gen, float(beta), mu, convention)


def model_state(model, L: int, beta: float = 1.0, mu: float | None = None, convention: str = ORDINARY, cache: SpectralCache | None = DEFAULT_CACHE) -> GibbsState:
    """Cached Gibbs state of a preset model on a chain of length ``L``.

    Fermionic models are block-diagonalized by particle number.
    """
    key = (model.name, tuple(sorted(model.params.items())), L, float(beta), mu, convention)

    def compute():
        H = model.hamiltonian(L)
        if model.is_fermionic:
            N = model.number_operator(L)
            return gibbs_state(H, beta, mu, N, convention, sectors=np.diag(N.matrix))
        return gibbs_state(H, beta, None, None, convention)

    return cache.get(key, compute) if cache is not None else compute()


def pressure(
    hamiltonian,
    region: Region | None = None,
    beta: float = 1.0,
    mu: float | None = None,
    number=None,
    convention: str = NORMALIZED,
) -> float:
    """``|region|^-1 log tr e^{-beta (H - mu N)}``.

    ``hamiltonian`` is an :class:`AssembledOperator` or an :class:`Interaction`
    (assembled on ``region``). The normalized trace divides by the dimension.
    """
    if isinstance(hamiltonian, Interaction):
        if region is None:
            raise ValueError("an interaction needs a region")
        hamiltonian = assemble(hamiltonian, region)
    h = _matrix(hamiltonian)
    region = getattr(hamiltonian, "region", region)
    gen = beta * h
    if mu is not None and mu != 0.0:
        gen = gen - beta * mu * _matrix(number)
    evals = np.linalg.eigvalsh(gen) if not _is_diagonal(gen) else np.real(np.diag(gen))
    lz = float(logsumexp(-evals))
    if convention == NORMALIZED:
        lz -= np.log(len(evals))
    return lz / len(region)


def von_neumann_entropy(state: GibbsState) -> float:
    p = state.weights
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def mean_entropy_energy(state: GibbsState, hamiltonian=None) -> tuple[float, float]:
    """Mean entropy and mean energy per site.

    The entropy carries the von Neumann sign, ``-tr rho log rho``, measured
    against the state's trace convention (so it vanishes at infinite
    temperature with the normalized trace). With this sign ``P = s - e``
    holds exactly at finite volume. The energy is ``omega(H_eff) / |region|``
    unless another ``hamiltonian`` is given.
    """
    s = von_neumann_entropy(state)
    if state.convention == NORMALIZED:
        s -= np.log(state.dim)
    if hamiltonian is None:
        e = float(np.dot(state.weights, state.spectrum.eigenvalues))
    else:
        e = float(np.real(state.expect(hamiltonian)))
    return s / state.volume, e / state.volume


# ---------------------------------------------------------------------------
# moment generating functions


def _overlap_weights(state: GibbsState, kspec: SpectralDecomposition) -> np.ndarray:
    """``u_j = sum_k |<k_j|h_k>|^2 e^{-(h_k - h_min)}``."""
    hv = state.spectrum.eigenvectors
    e = state.spectrum.eigenvalues
    boltz = np.exp(-(e - e[0]))
    if kspec.diagonal:
        perm = np.argmax(kspec.eigenvectors, axis=0)
        w = np.abs(hv[perm, :]) ** 2
    elif state.spectrum.diagonal:
        perm = np.argmax(hv, axis=0)
        w = np.abs(kspec.eigenvectors[perm, :].conj().T) ** 2
    else:
        w = np.abs(kspec.eigenvectors.conj().T @ hv) ** 2
    return w @ boltz


def log_trace_pair(state: GibbsState, observable, alphas) -> np.ndarray:
    """``log tr(e^{a K} e^{-H_eff})`` (ordinary trace) for each ``a``."""
    kspec = observable if isinstance(observable, SpectralDecomposition) else spectral(observable, label="K")
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if np.any(np.isnan(alphas)):
        raise ValueError("NaN coefficient")
    with np.errstate(divide="ignore"):
        logu = np.log(_overlap_weights(state, kspec))
    e0 = state.spectrum.eigenvalues[0]
    exponents = alphas[:, None] * kspec.eigenvalues[None, :] + logu[None, :]
    return logsumexp(exponents, axis=1) - e0


def log_expectation_exp(state: GibbsState, observable, alphas) -> np.ndarray:
    """``log omega(e^{a K})``; the denominator is the ``a = 0`` instance of the numerator."""
    kspec = observable if isinstance(observable, SpectralDecomposition) else spectral(observable, label="K")
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    both = log_trace_pair(state, kspec, np.concatenate([[0.0], alphas]))
    return both[1:] - both[0]


@dataclass(frozen=True)
class MGFValues:
    alphas: np.ndarray
    g: np.ndarray
    f: np.ndarray
    volume: int
    convention: str


def mgf(state: GibbsState, observable, alphas) -> MGFValues:
    """``g(a) = |L|^-1 log tr(e^{aK} e^{-H_eff})`` and ``f(a) = g(a) - |L|^-1 log tr e^{-H_eff}``.

    ``g`` follows the state's trace convention; ``f`` does not depend on it
    and is exactly zero at ``a = 0``.
    """
    kspec = observable if isinstance(observable, SpectralDecomposition) else spectral(observable, label="K")
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    both = log_trace_pair(state, kspec, np.concatenate([[0.0], alphas]))
    vol = state.volume
    shift = np.log(state.dim) if state.convention == NORMALIZED else 0.0
    g = (both[1:] - shift) / vol
    f = (both[1:] - both[0]) / vol
    return MGFValues(alphas, g, f, vol, state.convention)


@dataclass(frozen=True)
class DeviationMeasure:
    """Atoms ``k/|L|`` of ``K/|L|`` with their probabilities in the state."""

    atoms: np.ndarray
    weights: np.ndarray
    volume: int

    def probability(self, lo: float, hi: float) -> float:
        """Mass of the closed interval ``[lo, hi]``."""
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        sel = (self.atoms >= lo - tol) & (self.atoms <= hi + tol)
        return float(np.sum(self.weights[sel]))

    @property
    def mean(self) -> float:
        return float(np.dot(self.atoms, self.weights))

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))


def deviation_measure(state: GibbsState, observable, merge_tol: float = 1e-9) -> DeviationMeasure:
    kspec = observable if isinstance(observable, SpectralDecomposition) else spectral(observable, label="K")
    u = _overlap_weights(state, kspec)
    w = u / np.sum(u)
    k = kspec.eigenvalues
    tol = merge_tol * max(1.0, float(np.max(np.abs(k))))
    atoms, weights = [], []
    start = 0
    for i in range(1, len(k) + 1):
        if i == len(k) or k[i] - k[start] > tol:
            atoms.append(float(np.mean(k[start:i])))
            weights.append(float(np.sum(w[start:i])))
            start = i
    return DeviationMeasure(np.array(atoms) / state.volume, np.array(weights), state.volume)


# ---------------------------------------------------------------------------
# perturbations and the KMS identity


def _conjugated_in_eigenbasis(spec: SpectralDecomposition, a: np.ndarray, z: complex) -> np.ndarray:
    """``e^{izH} A e^{-izH}`` written in the eigenbasis of ``H``."""
    e = spec.eigenvalues
    phase = np.exp(1j * z * (e[:, None] - e[None, :]))
    return phase * spec.to_eigenbasis(a)


def _warn_if_large(m: np.ndarray, what: str) -> None:
    big = float(np.max(np.abs(m))) if m.size else 0.0
    if not np.isfinite(big) or big > CONDITIONING_LIMIT:
        warnings.warn(f"{what}: entries reach {big:.3e}; the imaginary-time window is ill-conditioned", ConditioningWarning, stacklevel=3)


def imaginary_time(state: GibbsState, op, s: float) -> np.ndarray:
    """``tau_{is}(A) = e^{-s H_eff} A e^{s H_eff}``."""
    t = _conjugated_in_eigenbasis(state.spectrum, _matrix(op), 1j * s)
    _warn_if_large(t, "imaginary-time evolution")
    return state.spectrum.from_eigenbasis(t)


def evolve(spec: SpectralDecomposition, op, z: complex) -> np.ndarray:
    """``e^{izH} A e^{-izH}`` for complex ``z``."""
    return spec.from_eigenbasis(_conjugated_in_eigenbasis(spec, _matrix(op), z))


@dataclass(frozen=True, eq=False)
class PerturbedState:
    """``omega^P`` for the generator ``H_eff + P``, i.e. ``rho^P ~ e^{-(H_eff + P)}``."""

    base: GibbsState
    perturbation: np.ndarray
    state: GibbsState

    def expect(self, op):
        return self.state.expect(op)

    def gamma(self, s: complex) -> np.ndarray:
        """``Gamma_s = e^{is(H+P)} e^{-isH}``; imaginary ``s`` is allowed."""
        a = self.state.spectrum.exp(1j * s)
        b = self.base.spectrum.exp(-1j * s)
        return a @ b


def perturbed_state(state: GibbsState, perturbation) -> PerturbedState:
    p = _matrix(perturbation)
    if p.shape != state.generator.shape:
        raise ValueError("perturbation acts on a different space")
    if np.max(np.abs(p - p.conj().T)) > 1e-12 * max(1.0, float(np.max(np.abs(p)))):
        raise ValueError("perturbation must be Hermitian")
    new = gibbs_state(state.generator + p, 1.0, None, None, state.convention, region=state.region)
    new = GibbsState(state.region, new.spectrum, new.generator, state.beta, state.mu, state.convention)
    return PerturbedState(state, p, new)


def kms_check(state: GibbsState, a, b, t_grid: Sequence[float] = (0.0,)) -> float:
    """Largest ``|omega(A tau_{t+i}(B)) - omega(tau_t(B) A)|`` over ``t_grid``.

    ``tau`` is generated by ``H_eff``; at ``t = 0`` this is
    ``omega(A e^{-H} B e^{H}) = omega(B A)``.
    """
    spec = state.spectrum
    at = spec.to_eigenbasis(_matrix(a))
    p = state.weights
    worst = 0.0
    for t in t_grid:
        shifted = _conjugated_in_eigenbasis(spec, _matrix(b), complex(t, 1.0))
        _warn_if_large(shifted, "KMS boundary value")
        real_t = _conjugated_in_eigenbasis(spec, _matrix(b), complex(t, 0.0))
        lhs = np.dot(p, np.einsum("kl,lk->k", at, shifted))
        rhs = np.dot(p, np.einsum("kl,lk->k", real_t, at))
        worst = max(worst, float(abs(lhs - rhs)))
    return worst
