"""Figure rendering for report bundles. Files only; no interactive backends."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 130
_STYLE = {
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.labelsize": 10,
    "axes.titlesize": 11,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (7.0, 3.6),
}
matplotlib.rcParams.update(_STYLE)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return str(path)


def commitment_heatmap(sol, schema, path):
    """On/off matrix, units on the y axis, periods on the x axis."""
    mat = np.array(sol.commitment, dtype=float)
    fig, ax = plt.subplots()
    ax.imshow(mat, aspect="auto", cmap="Greys", interpolation="nearest", vmin=0, vmax=1)
    ax.set_xlabel("period")
    ax.set_ylabel("unit")
    ax.set_yticks(range(schema.n_units))
    ax.set_yticklabels([g.name for g in schema.generators])
    ax.set_title("commitment")
    ax.grid(False)
    return _save(fig, path)


def dispatch_stack(sol, schema, path):
    """Stacked dispatch against the demand trace."""
    T = schema.horizon
    t = np.arange(T)
    disp = np.array(sol.dispatch)
    fig, ax = plt.subplots()
    ax.stackplot(t, disp, labels=[g.name for g in schema.generators], alpha=0.85)
    ax.plot(t, schema.demand, "k--", lw=1.5, label="demand")
    ax.set_xlabel("period")
    ax.set_ylabel("MW")
    ax.set_title("dispatch vs demand")
    if schema.n_units <= 12:
        ax.legend(ncol=2, loc="upper right")
    return _save(fig, path)


def tau_histogram(taus, path, bins: int = 25):
    """Runtime-ratio distribution; the tau=1 line separates speedups."""
    taus = np.asarray([t for t in taus if np.isfinite(t)], dtype=float)
    fig, ax = plt.subplots()
    if len(taus):
        ax.hist(taus, bins=bins, color="#4878a8", edgecolor="white")
    ax.axvline(1.0, color="k", ls="--", lw=1)
    ax.set_xlabel("tau = t_guided / t_default")
    ax.set_ylabel("instances")
    ax.set_title("runtime ratio distribution")
    return _save(fig, path)


def gap_box(gaps_by_bin: dict, path):
    """Optimality-gap distributions per size bin."""
    keys = sorted(gaps_by_bin)
    data = [np.asarray([g for g in gaps_by_bin[k] if np.isfinite(g)]) for k in keys]
    fig, ax = plt.subplots()
    if any(len(d) for d in data):
        ax.boxplot([d if len(d) else [0.0] for d in data], tick_labels=[str(k) for k in keys])
    ax.set_yscale("symlog", linthresh=1e-8)
    ax.set_xlabel("units")
    ax.set_ylabel("gap at termination")
    ax.set_title("optimality gaps by size")
    return _save(fig, path)
