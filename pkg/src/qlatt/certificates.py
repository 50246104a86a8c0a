"""Checkable versions of the three regime hypotheses (high temperature, improved high temperature, one dimension)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .lattice import Interaction, Region, norm_lambda
from .operators import assemble, commutator_norm

H1, H2, H3 = "H1", "H2", "H3"
HYPOTHESES = (H1, H2, H3)
COMMUTATOR_TOL = 1e-10
H2_SIDE = 3


class CertificateError(ValueError):
    """A hypothesis check received a malformed split."""


@dataclass(frozen=True)
class CertificateReport:
    hypothesis: str
    passed: bool
    margin: float | None
    alpha_window: float
    reason: str = ""
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "hypothesis": self.hypothesis,
            "passed": self.passed,
            "margin": self.margin,
            "alpha_window": self.alpha_window if math.isfinite(self.alpha_window) else "inf",
            "reason": self.reason,
            "details": self.details,
        }


def alpha_window(psi: Interaction, lam: float) -> float:
    """Half-width of the admissible ``alpha`` interval; infinite for one-site observables."""
    if psi.is_single_site:
        return math.inf
    n = norm_lambda(psi, lam)
    return math.inf if n == 0 else 4.0 / (lam * n)


def h2_check_region(interaction: Interaction, side: int = H2_SIDE) -> Region:
    """Cube of the given side, shrunk until it fits the dense cap of a commutator check."""
    from .gibbs import max_dim

    d = interaction.dimension
    while side > 1 and interaction.local_dim ** (side**d) > min(max_dim(), 1024):
        side -= 1
    return Region.cube(side, d)


def certificate(
    phi: Interaction,
    psi: Interaction,
    lam: float,
    hypothesis: str = H1,
    split: tuple[Interaction, Interaction] | None = None,
) -> CertificateReport:
    """Check one hypothesis and report its margin.

    ``H1``: ``(lam/4)||Phi||_lam < 1``. ``H2``: ``split = (Phi', Phi'')`` with
    ``Phi''`` single-site, ``[H', H''] = 0`` on a small cube and
    ``(lam/4)||Phi'||_lam < 1``. ``H3``: ``d = 1`` and finite range for both.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if hypothesis not in HYPOTHESES:
        raise ValueError(f"hypothesis must be one of {HYPOTHESES}")
    window = alpha_window(psi, lam)
    if hypothesis == H1:
        m = lam / 4.0 * norm_lambda(phi, lam)
        ok = m < 1.0
        return CertificateReport(H1, ok, m, window if ok else 0.0, "" if ok else "margin >= 1", {"norm_lambda": norm_lambda(phi, lam)})
    if hypothesis == H2:
        if split is None:
            raise CertificateError("H2 needs a split (Phi', Phi'')")
        p1, p2 = split
        if not p2.is_single_site:
            raise CertificateError("Phi'' must consist of one-site terms")
        region = h2_check_region(p1)
        comm = commutator_norm(assemble(p1, region), assemble(p2, region))
        if comm > COMMUTATOR_TOL:
            raise CertificateError(f"[H', H''] = {comm:.3e} on a cube of side {region.cube_side()}")
        m = lam / 4.0 * norm_lambda(p1, lam)
        ok = m < 1.0
        details = {"commutator": comm, "check_side": region.cube_side(), "norm_lambda_prime": norm_lambda(p1, lam)}
        return CertificateReport(H2, ok, m, window if ok else 0.0, "" if ok else "margin >= 1", details)
    if phi.dimension != 1:
        return CertificateReport(H3, False, None, 0.0, "dimension")
    if phi.range is None or psi.range is None:
        return CertificateReport(H3, False, None, 0.0, "range")
    return CertificateReport(H3, True, None, math.inf, "", {"range": max(phi.range, psi.range)})


def best_certificate(phi: Interaction, psi: Interaction, lam: float, split=None) -> CertificateReport:
    """The first passing hypothesis in the order H3, H1, H2; else the H1 report."""
    tried = []
    for hyp in (H3, H1) + ((H2,) if split is not None else ()):
        rep = certificate(phi, psi, lam, hyp, split)
        if rep.passed:
            return rep
        tried.append(rep)
    return tried[1]
