"""Moment generating function curves, Legendre transforms, translated pressures and decay-rate probes."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from . import gibbs
from .certificates import CertificateReport, best_certificate
from .gibbs import DeviationMeasure
from .lattice import norm_zero
from .models import Model, observable, observable_operator

CONVEXITY_TOL = 1e-9


# ---------------------------------------------------------------------------
# curves


@dataclass
class MGFCurve:
    """``f_L(alpha)`` (and ``g_L``) sampled on one ``alpha`` grid for a sequence of chain lengths."""

    alphas: np.ndarray
    volumes: list[int] = field(default_factory=list)
    f: dict[int, np.ndarray] = field(default_factory=dict)
    g: dict[int, np.ndarray] = field(default_factory=dict)
    convention: str = gibbs.ORDINARY
    window: float = math.inf
    label: str = ""
    f_inf: np.ndarray | None = None
    f_err: np.ndarray | None = None

    def add(self, volume: int, values: gibbs.MGFValues) -> None:
        if not np.array_equal(values.alphas, self.alphas):
            raise ValueError("alpha grids differ")
        if volume not in self.f:
            self.volumes.append(volume)
            self.volumes.sort()
        self.f[volume] = np.asarray(values.f)
        self.g[volume] = np.asarray(values.g)

    def extrapolate(self) -> "Extrapolation":
        ex = extrapolate(self.volumes, np.array([self.f[v] for v in self.volumes]))
        self.f_inf, self.f_err = ex.value, ex.error
        return ex

    def best(self) -> np.ndarray:
        """The extrapolated curve when available, else the largest volume."""
        return self.f_inf if self.f_inf is not None else self.f[self.volumes[-1]]

    def second_differences(self, volume: int) -> np.ndarray:
        return second_divided_differences(self.alphas, self.f[volume])


def second_divided_differences(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 3:
        return np.zeros(0)
    s = np.diff(y) / np.diff(x)
    return np.diff(s) / (0.5 * (x[2:] - x[:-2]))


def is_convex(x, y, tol: float = CONVEXITY_TOL) -> bool:
    return bool(np.all(second_divided_differences(x, y) >= -tol))


def lipschitz_ok(x, y, constant: float, slack: float = 1e-9) -> bool:
    """``|y_i - y_j| <= constant |x_i - x_j| + slack`` for all pairs (checked on adjacent points and the extremes)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    slopes = np.abs(np.diff(y)) - constant * np.abs(np.diff(x))
    return bool(np.all(slopes <= slack))


def admissible_alphas(alphas: np.ndarray, cert: CertificateReport) -> np.ndarray:
    """Mask of grid points strictly inside the certified window."""
    return np.abs(alphas) < cert.alpha_window


def mgf_curve(
    model: Model,
    observable_name: str,
    lengths: Sequence[int],
    alphas: Sequence[float],
    beta: float = 1.0,
    mu: float | None = None,
    convention: str = gibbs.ORDINARY,
    lam: float = 1.0,
    cache: gibbs.SpectralCache | None = gibbs.DEFAULT_CACHE,
    executor=None,
    enforce_window: bool = True,
) -> MGFCurve:
    """Compute ``f_L`` for each length; values outside the certified window are refused.

    Raises ``ValueError`` if any requested ``alpha`` lies outside the window
    given by the best passing certificate, unless ``enforce_window`` is off.
    """
    alphas = np.asarray(alphas, dtype=float)
    phi = model.effective(beta, mu or 0.0)
    psi = observable(model, observable_name)
    cert = best_certificate(phi, psi, lam)
    if enforce_window and not np.all(admissible_alphas(alphas, cert)):
        raise ValueError(f"alpha grid leaves the admissible window |alpha| < {cert.alpha_window:.4g} ({cert.hypothesis})")
    curve = MGFCurve(alphas, convention=convention, window=cert.alpha_window, label=f"{model.name}:{observable_name}")

    def one(L):
        state = gibbs.model_state(model, L, beta, mu, convention, cache)
        return L, gibbs.mgf(state, observable_operator(model, observable_name, L), alphas)

    results = list(executor.map(one, lengths)) if executor is not None else [one(L) for L in lengths]
    for L, vals in results:
        curve.add(L, vals)
    return curve


def lipschitz_constant(model: Model, observable_name: str) -> float:
    """``||Psi||_0``, the Lipschitz constant of ``f``."""
    return norm_zero(observable(model, observable_name))


# ---------------------------------------------------------------------------
# Legendre transform


@dataclass(frozen=True)
class RateFunction:
    """``I(x) = sup_alpha (alpha x - f(alpha))`` on a grid.

    ``window_limited`` marks points outside the slope range of ``f``, where
    the value is the boundary linear extension rather than a conjugate value.
    """

    x: np.ndarray
    values: np.ndarray
    window_limited: np.ndarray
    domain: tuple[float, float]

    def as_extended(self) -> np.ndarray:
        """Values with window-limited points mapped to ``+inf``."""
        return np.where(self.window_limited, np.inf, self.values)

    def __call__(self, x) -> np.ndarray:
        return np.interp(x, self.x, self.values)

    def infimum(self, lo: float, hi: float) -> float:
        """``inf_{[lo, hi]} I`` over grid points in the interval and the interpolated endpoints."""
        inside = (self.x >= lo) & (self.x <= hi)
        pts = [self.values[inside]] if np.any(inside) else []
        ends = [v for v in (lo, hi) if self.x[0] <= v <= self.x[-1]]
        if ends:
            pts.append(np.interp(ends, self.x, self.values))
        if not pts:
            return math.inf
        return float(np.min(np.concatenate(pts)))

    @property
    def minimizer(self) -> float:
        return float(self.x[np.argmin(self.values)])


def lower_hull(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull of points sorted by ``x`` (monotone chain)."""
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull, dtype=int)


def legendre(alphas, f, x=None, n_x: int | None = None, tol: float = CONVEXITY_TOL) -> RateFunction:
    """Grid Legendre transform in linear time after sorting.

    Input violating convexity by more than ``tol`` is rejected; smaller
    violations are removed by taking the lower convex hull.
    """
    a = np.asarray(alphas, dtype=float)
    fv = np.asarray(f, dtype=float)
    if a.ndim != 1 or a.shape != fv.shape or len(a) < 2:
        raise ValueError("need matching one-dimensional grids with at least two points")
    if not np.all(np.isfinite(fv)):
        raise ValueError("f must be finite on the grid")
    if np.any(np.diff(a) <= 0):
        raise ValueError("alpha grid must be strictly ascending")
    if np.any(second_divided_differences(a, fv) < -tol * max(1.0, float(np.max(np.abs(fv))))):
        raise ValueError("input is not convex within tolerance")
    h = lower_hull(a, fv)
    ha, hf = a[h], fv[h]
    slopes = np.diff(hf) / np.diff(ha)
    lo, hi = float(slopes[0]), float(slopes[-1])
    if x is None:
        x = np.linspace(lo, hi, n_x or len(a))
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    best = np.empty(len(x), dtype=int)
    k = 0
    for idx in order:
        while k < len(slopes) and slopes[k] < x[idx]:
            k += 1
        best[idx] = k
    values = ha[best] * x - hf[best]
    span = max(1.0, abs(lo), abs(hi))
    limited = (x < lo - 1e-12 * span) | (x > hi + 1e-12 * span)
    return RateFunction(x, values, limited, (lo, hi))


# ---------------------------------------------------------------------------
# extrapolation


@dataclass(frozen=True)
class Extrapolation:
    value: np.ndarray
    error: np.ndarray
    slope: np.ndarray
    cauchy: bool
    increments: np.ndarray


def extrapolate(volumes: Sequence[int], values) -> Extrapolation:
    """Fit ``f_V = f_inf + c / V`` over the three largest volumes.

    ``values`` has one row per volume (scalars or arrays over ``alpha``).
    The error bar is the largest fit residual. ``cauchy`` is False when the
    successive increments fail to decrease.
    """
    vols = np.asarray(volumes, dtype=float)
    vals = np.asarray(values, dtype=float)
    if len(vols) < 3:
        raise ValueError("extrapolation needs at least three volumes")
    if np.any(np.diff(vols) <= 0):
        raise ValueError("volumes must be ascending")
    scalar = vals.ndim == 1
    y = vals.reshape(len(vols), -1)
    design = np.column_stack([np.ones(3), 1.0 / vols[-3:]])
    coef, *_ = np.linalg.lstsq(design, y[-3:], rcond=None)
    resid = np.max(np.abs(design @ coef - y[-3:]), axis=0)
    inc = np.abs(np.diff(y, axis=0))
    scale = np.maximum(1.0, np.abs(y).max(axis=0))
    flat = np.all(inc <= 1e-13 * scale, axis=0)
    decreasing = np.all(np.diff(inc, axis=0) < 0, axis=0) if len(inc) > 1 else np.ones(y.shape[1], bool)
    cauchy = bool(np.all(flat | decreasing))
    value, slope = coef[0], coef[1]
    if scalar:
        return Extrapolation(float(value[0]), float(resid[0]), float(slope[0]), cauchy, inc[:, 0])
    return Extrapolation(value, resid, slope, cauchy, inc)


# ---------------------------------------------------------------------------
# translated pressures


@dataclass(frozen=True)
class JointSpectrum:
    """Energies with their particle numbers (all zero for spin models)."""

    energies: np.ndarray
    numbers: np.ndarray
    volume: int

    def log_z(self, beta: float, mu: float = 0.0) -> float:
        return float(logsumexp(-beta * (self.energies - mu * self.numbers)))

    def pressure(self, beta: float, mu: float = 0.0) -> float:
        return self.log_z(beta, mu) / self.volume


def joint_spectrum(model: Model, L: int, cache: gibbs.SpectralCache | None = gibbs.DEFAULT_CACHE) -> JointSpectrum:
    """Eigenvalues of ``H`` sector by sector in the particle number."""

    def compute():
        h = model.hamiltonian(L).matrix
        if not model.is_fermionic:
            return JointSpectrum(np.linalg.eigvalsh(h), np.zeros(h.shape[0]), L)
        n = np.rint(np.diag(model.number_operator(L).matrix)).astype(int)
        es, ns = [], []
        for k in np.unique(n):
            idx = np.flatnonzero(n == k)
            es.append(np.linalg.eigvalsh(h[np.ix_(idx, idx)]))
            ns.append(np.full(len(idx), k))
        return JointSpectrum(np.concatenate(es), np.concatenate(ns).astype(float), L)

    key = ("joint", model.name, tuple(sorted(model.params.items())), L)
    return cache.get(key, compute) if cache is not None else compute()


def translated_pressure_energy(beta: float, mu: float, alpha: float, model: Model, L: int, cache=gibbs.DEFAULT_CACHE) -> float:
    """``P_L(beta - alpha, beta mu / (beta - alpha)) - P_L(beta, mu)``, the finite-volume value for ``K = H``."""
    if alpha == beta:
        raise ValueError("alpha = beta is a pole of the translated pressure")
    if abs(beta - alpha) < 0.05:
        warnings.warn(f"|beta - alpha| = {abs(beta - alpha):.3g} is small; the shifted chemical potential is ill-conditioned", stacklevel=2)
    js = joint_spectrum(model, L, cache)
    b2 = beta - alpha
    return js.pressure(b2, beta * mu / b2) - js.pressure(beta, mu)


def translated_pressure_density(beta: float, mu: float, alpha: float, model: Model, L: int, cache=gibbs.DEFAULT_CACHE) -> float:
    """``P_L(beta, mu + alpha / beta) - P_L(beta, mu)``, the finite-volume value for ``K = N``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if not model.is_fermionic:
        raise ValueError("the density form needs a particle number")
    js = joint_spectrum(model, L, cache)
    return js.pressure(beta, mu + alpha / beta) - js.pressure(beta, mu)


# ---------------------------------------------------------------------------
# decay probes


def bernoulli_rate(x) -> np.ndarray:
    """Cramer rate of the mean of independent fair signs, infinite outside ``[-1, 1]``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        p, q = (1 + x) / 2, (1 - x) / 2
        val = np.log(2.0) + np.where(p > 0, p * np.log(np.where(p > 0, p, 1)), 0) + np.where(q > 0, q * np.log(np.where(q > 0, q, 1)), 0)
    return np.where(np.abs(x) <= 1, val, np.inf)


@dataclass(frozen=True)
class ProbeReport:
    interval: tuple[float, float]
    volumes: tuple[int, ...]
    rates: tuple[float, ...]
    inf_rate: float
    gaps: tuple[float, ...]
    empty: tuple[int, ...]
    contains_mean: bool

    @property
    def gaps_decreasing(self) -> bool:
        g = np.array(self.gaps)
        return bool(np.all(np.isfinite(g)) and np.all(np.diff(g) < 0))

    @property
    def rates_monotone(self) -> bool:
        r = np.array(self.rates)
        return bool(np.all(np.diff(r) <= 0) or np.all(np.diff(r) >= 0))

    def rows(self):
        for L, r, gap in zip(self.volumes, self.rates, self.gaps):
            yield L, self.interval[0], self.interval[1], r, self.inf_rate, gap


def _inf_over(rate, lo: float, hi: float, n: int = 4001) -> float:
    if isinstance(rate, RateFunction):
        return rate.infimum(lo, hi)
    xs = np.linspace(lo, hi, n)
    return float(np.min(rate(xs)))


def decay_probe(measures: Mapping[int, DeviationMeasure], interval: tuple[float, float], rate: RateFunction | Callable) -> ProbeReport:
    """``r_L = -|L|^-1 log rho_L(C)`` against ``inf_C I`` for a closed interval ``C``.

    Volumes with ``rho_L(C) = 0`` get ``r_L = +inf`` and are listed in ``empty``.
    """
    lo, hi = interval
    if lo > hi:
        raise ValueError("interval endpoints are reversed")
    vols = tuple(sorted(measures))
    inf_i = _inf_over(rate, lo, hi)
    rates, gaps, empty = [], [], []
    for L in vols:
        p = measures[L].probability(lo, hi)
        if p <= 0:
            rates.append(math.inf)
            empty.append(L)
        else:
            rates.append(-math.log(p) / measures[L].volume)
        gaps.append(rates[-1] - inf_i)
    mean = measures[vols[-1]].mean
    return ProbeReport((lo, hi), vols, tuple(rates), inf_i, tuple(gaps), tuple(empty), lo <= mean <= hi)
