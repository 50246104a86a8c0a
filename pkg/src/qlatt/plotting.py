"""Figures written next to the CSV outputs."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def plot_mgf(curve, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for L in curve.volumes:
        ax.plot(curve.alphas, curve.f[L], lw=1.2, label=f"L={L}")
    if curve.f_inf is not None:
        ax.plot(curve.alphas, curve.f_inf, "k--", lw=1.0, label="extrapolated")
    ax.set_xlabel(r"$\alpha$")
    ax.set_ylabel(r"$f_\Lambda(\alpha)$")
    ax.set_title(curve.label)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_rate(rate, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ok = ~rate.window_limited
    ax.plot(rate.x[ok], rate.values[ok], lw=1.2, label="I(x)")
    if np.any(~ok):
        ax.plot(rate.x[~ok], rate.values[~ok], ":", color="gray", label="window-limited")
    ax.set_xlabel("x")
    ax.set_ylabel("I(x)")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_probe(report, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.6))
    vols = np.array(report.volumes)
    ax.plot(vols, report.rates, "o-", label=r"$r_\Lambda$")
    ax.axhline(report.inf_rate, color="k", ls="--", lw=1.0, label=r"$\inf_C I$")
    ax.set_xlabel("L")
    ax.set_ylabel("decay rate")
    ax.set_title(f"C = [{report.interval[0]:g}, {report.interval[1]:g}]")
    ax.legend(fontsize=8)
    return _save(fig, path)
