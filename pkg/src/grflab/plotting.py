"""PNG figures rendered from the CSV artifacts of a run directory."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _table(path: Path):
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")
    return np.atleast_1d(data)


def plot_history(directory: Path) -> Path:
    d = _table(directory / "history.csv")
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5), constrained_layout=True)
    for name, ax in zip(("a", "h", "phi"), axes):
        ax.fill_between(d["t"], d[f"{name}_min"], d[f"{name}_max"], alpha=0.3)
        ax.plot(d["t"], d[f"{name}_mean"])
        ax.set_xlabel("t")
        ax.set_title(name)
    out = directory / "history.png"
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def plot_snapshots(directory: Path) -> Path:
    d = _table(directory / "snapshots.csv")
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5), constrained_layout=True)
    for t in np.unique(d["t"]):
        rows = d[d["t"] == t]
        for name, ax in zip(("h", "phi", "R"), axes):
            ax.plot(rows["x"], rows[name], label=f"t={t:.3g}")
            ax.set_title(name)
            ax.set_xlabel("x")
    axes[0].legend(fontsize="small")
    out = directory / "snapshots.png"
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def plot_entropy(directory: Path) -> Path:
    d = _table(directory / "entropy.csv")
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), constrained_layout=True)
    for base in np.unique(d["base"]):
        rows = d[d["base"] == base]
        axes[0].plot(rows["tau"], rows["N_H"], label=f"N^H, base {base}")
        axes[0].plot(rows["tau"], rows["W_H"], "--", label=f"W^H, base {base}")
        axes[1].plot(rows["tau"], rows["Psi"], label=f"Psi, base {base}")
        axes[1].plot(rows["tau"], rows["P"], "--", label=f"P, base {base}")
    for ax in axes:
        ax.set_xlabel("tau")
        ax.legend(fontsize="small")
    out = directory / "entropy.png"
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def render_run(directory: Path) -> list:
    """Render every figure whose source CSV exists; returns the written paths."""
    directory = Path(directory)
    out = []
    for csv_name, fn in (("history.csv", plot_history), ("snapshots.csv", plot_snapshots),
                         ("entropy.csv", plot_entropy)):
        if (directory / csv_name).exists():
            out.append(fn(directory))
    return out
