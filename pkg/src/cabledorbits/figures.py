"""Matplotlib figure output for the command line reports (Agg backend)."""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_trajectories", "plot_sweep", "plot_mode_decay"]


def plot_trajectories(pos: np.ndarray, path: str, title: str = "") -> None:
    """Planar paths of all bodies; pos has shape (T, N, 2d)."""
    fig, ax = plt.subplots(figsize=(6, 6))
    for k in range(pos.shape[1]):
        label = "pair a" if k == 0 else ("pair b" if k == 1 else f"body {k + 1}")
        ax.plot(pos[:, k, 0], pos[:, k, 1], lw=0.7, label=label)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sweep(
    eps: Sequence[float],
    distances: Sequence[float],
    path: str,
    ylabel: str = "H1 distance to ansatz",
) -> None:
    """Log-log distance-to-ansatz against the pair radius, with a linear guide."""
    eps = np.asarray(eps, dtype=float)
    distances = np.asarray(distances, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(eps, distances, "o-", label="measured")
    if len(eps) > 1 and np.all(distances > 0):
        ref = distances[0] * eps / eps[0]
        ax.loglog(eps, ref, "--", color="gray", label="slope 1 guide")
    ax.set_xlabel("pair radius")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_mode_decay(coeffs: np.ndarray, L: int, path: str) -> None:
    """Per-mode coefficient magnitude of a refined loop."""
    mags = np.linalg.norm(coeffs, axis=1)
    modes = np.arange(-L, L + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(modes, np.maximum(mags, 1e-20), ".-", lw=0.7)
    ax.set_xlabel("Fourier mode")
    ax.set_ylabel("coefficient magnitude")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
