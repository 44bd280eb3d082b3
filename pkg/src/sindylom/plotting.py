"""Matplotlib figures written next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.grid": True,
    "grid.color": "#DDD",
    "figure.constrained_layout.use": True,
    # svg/png output should not depend on the wall clock
    "svg.hashsalt": "sindylom",
}

LINESTYLES = [":", "-.", "--", (0, (5, 1, 1, 1))]
COLORS = ["tab:blue", "tab:green", "tab:purple", "tab:orange", "tab:red"]


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path


def plot_prediction(truth: np.ndarray, preds: dict[str, np.ndarray], path, *,
                    k0: int = 0, title: str = "") -> Path:
    """True states (black) against one or more predicted trajectories.

    ``truth`` is (T, n); each prediction may be shorter (diverged runs).
    """
    truth = np.atleast_2d(np.asarray(truth, dtype=float).T).T
    n = truth.shape[1]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(n, 1, figsize=(7, 2.2 * n), sharex=True, squeeze=False)
        k = np.arange(k0, k0 + len(truth))
        for j, ax in enumerate(axes[:, 0]):
            ax.plot(k, truth[:, j], color="k", lw=1.0, label="true")
            for i, (name, p) in enumerate(preds.items()):
                p = np.atleast_2d(np.asarray(p, dtype=float).T).T
                ax.plot(k[: len(p)], p[:, j], lw=1.0, ls=LINESTYLES[i % len(LINESTYLES)],
                        color=COLORS[i % len(COLORS)], label=name)
            ax.set_ylabel(f"$x_{{{j + 1}}}$")
        axes[-1, 0].set_xlabel("time step $k$")
        axes[0, 0].legend(loc="upper right", ncol=min(len(preds) + 1, 4))
        if title:
            axes[0, 0].set_title(title)
        return _save(fig, path)


def plot_convergence(records, path) -> Path:
    gens = [r.generation for r in records]
    best = np.array([r.best for r in records])
    mean = np.array([r.mean for r in records])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.semilogy(gens, best, color="tab:purple", label="best $J_{ms}$")
        ax.semilogy(gens, mean, color="0.6", lw=0.8, label="population mean")
        ax.set_xlabel("generation")
        ax.set_ylabel("$J_{ms}$")
        ax.legend()
        return _save(fig, path)


def plot_coefficients(models: dict, path) -> Path:
    """Coefficient magnitude map per model; zero entries stay white."""
    names = list(models)
    p = max(m.spec.p for m in models.values())
    n = next(iter(models.values())).spec.n_state
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(names), figsize=(1.3 + 1.1 * n * len(names), 0.9 + 0.16 * p),
                                 squeeze=False)
        for ax, name in zip(axes[0], names):
            m = models[name]
            mag = np.full((p, n), np.nan)
            nz = m.Xi != 0
            mag[: m.spec.p][nz] = np.log10(np.abs(m.Xi[nz]))
            im = ax.imshow(mag, aspect="auto", cmap="viridis", interpolation="nearest")
            ax.set_xticks(range(n), [f"$\\xi_{{{j + 1}}}$" for j in range(n)])
            ax.set_yticks(range(m.spec.p), m.spec.names(), fontsize=6)
            ax.grid(False)
            ax.set_title(name)
        fig.colorbar(im, ax=axes[0, -1], label="log10 |coefficient|")
        return _save(fig, path)
