"""Matplotlib figure rendering for the report paths.

Figures are written next to the delimited output; every plot is derived
from the same CSV-backed data, so skipping them (--no-plot) loses nothing.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_magnitude_profile(ts, magnitudes, path, label=None, title=None):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.semilogx(ts, magnitudes, lw=1.5, label=label)
    ax.set_xlabel("scale t")
    ax.set_ylabel("magnitude")
    if title:
        ax.set_title(title)
    if label:
        ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_profile_family(profiles, path, title=None):
    """Overlay per-step magnitude profiles, colored from red (0) to blue (N)."""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    n = max(len(profiles) - 1, 1)
    cmap = plt.get_cmap("coolwarm_r")
    for step, (ts, mags) in enumerate(profiles):
        ax.semilogx(ts, mags, color=cmap(step / n), lw=1.0)
    ax.set_xlabel("scale t")
    ax.set_ylabel("magnitude")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_trace(rows, path, title=None):
    """Diversity quotients, nondominated fraction, and IGD against timestep."""
    steps = [r["step"] for r in rows]
    base_f = rows[0]["mag_feasible"]
    base_n = rows[0]["mag_nondom"]
    base_c = max(rows[0]["n_nondom"], 1)
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    axes[0].plot(steps, [r["mag_feasible"] / base_f for r in rows], "b-o", ms=3,
                 label="feasible")
    axes[0].plot(steps, [r["mag_nondom"] / base_n for r in rows], "r-o", ms=3,
                 label="nondominated")
    axes[0].axhline(1.0, color="gray", lw=0.6)
    axes[0].set_ylabel("diversity quotient")
    axes[0].legend(fontsize=8)
    axes[1].plot(steps, [r["n_nondom"] / base_c for r in rows], "k-o", ms=3)
    axes[1].axhline(1.0, color="gray", lw=0.6)
    axes[1].set_ylabel("nondominated fraction")
    axes[2].plot(steps, [r["igd"] for r in rows], "g-o", ms=3)
    axes[2].set_ylabel("IGD")
    axes[2].set_ylim(bottom=0)
    for ax in axes:
        ax.set_xlabel("timestep")
        ax.grid(alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_point_comparison(initial, terminal, path, title=None, dims=(0, 1)):
    """Initial (red) vs terminal (blue) configurations, first two coordinates."""
    i, j = dims
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.6), sharex=True, sharey=True)
    axes[0].scatter(initial[:, i], initial[:, j], s=8, c="red", alpha=0.6)
    axes[0].set_title("initial")
    axes[1].scatter(terminal[:, i], terminal[:, j], s=8, c="blue", alpha=0.6)
    axes[1].set_title("terminal")
    for ax in axes:
        ax.set_aspect("equal", adjustable="box")
        ax.grid(alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_magnitude_trace(magnitudes, path, title=None):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(np.arange(len(magnitudes)), magnitudes, "b-", lw=1.2)
    ax.set_xlabel("step")
    ax.set_ylabel("magnitude")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    return _save(fig, path)
