"""Figure rendering for simulation reports.

Renders the time-series products of a simulation run to PNG files next to
the delimited output.  Only the CSV/JSON artifacts are contractually
byte-stable; figures are a convenience view of the same data.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _new_axes(title: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(7.0, 4.2), constrained_layout=True)
    ax.set_title(title)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, directory: str, name: str) -> str:
    path = os.path.join(directory, name)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_observables(times, columns: dict, directory: str) -> str:
    """One curve per observable expectation."""
    fig, ax = _new_axes("Observable expectations", "expectation value")
    for label, values in columns.items():
        ax.plot(times, np.real(values), label=label, linewidth=1.2)
    if columns:
        ax.legend(fontsize=8, ncol=2)
    return _save(fig, directory, "observables.png")


def render_audits(times, hybrid, poisson_only, moyal_only, directory: str) -> str:
    """Canonical-relation drift for the three bracket audits (log scale)."""
    fig, ax = _new_axes("Canonical relation audit", "max |bracket - canonical|")
    floor = 1e-18
    ax.semilogy(times, np.maximum(hybrid, floor), label="hybrid bracket")
    ax.semilogy(times, np.maximum(poisson_only, floor), label="Poisson only")
    ax.semilogy(times, np.maximum(moyal_only, floor), label="Moyal only")
    ax.legend(fontsize=8)
    return _save(fig, directory, "audits.png")


def render_energy(times, components: dict, directory: str) -> str:
    """Energy components and the total along the run."""
    fig, ax = _new_axes("Energy components", "expectation value")
    for label, values in components.items():
        ax.plot(times, np.real(values), label=label, linewidth=1.2)
    ax.legend(fontsize=8)
    return _save(fig, directory, "energy.png")


def render_backreaction(times, report: dict, directory: str) -> str:
    """Classical moments, coupled run against the uncoupled baseline."""
    fig, axes = plt.subplots(
        2, 1, figsize=(7.0, 6.4), sharex=True, constrained_layout=True
    )
    axes[0].plot(times, report["mean_qC"], label="<qC> coupled")
    axes[0].plot(times, report["baseline_mean_qC"], "--", label="<qC> baseline")
    axes[0].plot(times, report["mean_pC"], label="<pC> coupled")
    axes[0].plot(times, report["baseline_mean_pC"], "--", label="<pC> baseline")
    axes[0].set_ylabel("classical means")
    axes[0].grid(True, alpha=0.3)
    axes[0].legend(fontsize=8, ncol=2)
    axes[1].plot(times, report["var_qC"], label="var(qC) coupled")
    axes[1].plot(times, report["baseline_var_qC"], "--", label="var(qC) baseline")
    axes[1].plot(times, report["var_pC"], label="var(pC) coupled")
    axes[1].plot(times, report["baseline_var_pC"], "--", label="var(pC) baseline")
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("classical covariances")
    axes[1].grid(True, alpha=0.3)
    axes[1].legend(fontsize=8, ncol=2)
    fig.suptitle("Backreaction on the classical sector")
    return _save(fig, directory, "backreaction.png")
