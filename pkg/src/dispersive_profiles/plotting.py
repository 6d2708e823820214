"""Figures for reports, rendered off-screen.

All functions take plain report dictionaries (as emitted in JSON) or fields,
write one PNG and return its path.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .field import Field  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_strichartz_trace(report: dict, path, floor: float | None = None):
    """Remainder S-surrogate and diagonal Strichartz norm against the step index."""
    tr = report["strichartz_trace"]
    steps = [t["step"] for t in tr]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(steps, [t["S"] for t in tr], "o-", label="S-surrogate (max over n)")
        ax.semilogy(steps, [t["Lr"] for t in tr], "s--", label="diagonal $L^r_{t,x}$ (max over n)")
        if floor:
            ax.axhline(floor, color="0.4", lw=0.8, ls=":", label="noise floor")
        ax.set_xlabel("profiles extracted")
        ax.set_ylabel("remainder norm")
        ax.set_xticks(steps)
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_ledger(report: dict, path):
    """Profile energies and the tail-mean remainder energy after each step."""
    ledger = report["ledger"]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if ledger:
            steps = [e["step"] for e in ledger]
            ax.bar(steps, [e["profile_energy"] for e in ledger], color="C0", alpha=0.7, label="profile energy")
            rem = [float(np.mean(e["remainder_energy"])) for e in ledger]
            ax.plot(steps, rem, "ko-", label="mean remainder energy")
            ax.set_xticks(steps)
            ax.set_yscale("log")
        ax.set_xlabel("step")
        ax.set_ylabel("$\\dot H^s$ energy")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_profiles(profiles: list[Field], path):
    """Modulus of each profile along the first axis through the origin."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for j, U in enumerate(profiles):
            g = U.grid
            line = U.phys[(slice(None), slice(None)) + (0,) * (g.d - 1)]
            mod = np.sqrt(np.sum(np.abs(line) ** 2, axis=0))
            order = np.argsort(g.x1d)
            ax.plot(g.x1d[order], mod[order], label=f"$U^{{{j + 1}}}$")
        ax.set_xlabel("$x_1$")
        ax.set_ylabel("$|U(x)|$")
        if profiles:
            ax.legend(frameon=False)
        return _save(fig, path)


def plot_trace(columns: dict, x: str, ys: list[str], path, logy: bool = False, title: str | None = None):
    """Generic line plot of trace columns (as written to CSV)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for y in ys:
            ax.plot(columns[x], columns[y], "o-", ms=3, label=y)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(x)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_annulus_masses(masses: np.ndarray, j_min: int, path):
    """Dyadic annulus masses per member as an image (log scale)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        m = np.asarray(masses, dtype=float)
        top = m.max() if m.size and m.max() > 0 else 1.0
        img = np.log10(np.maximum(m / top, 1e-16))
        im = ax.imshow(
            img.T,
            origin="lower",
            aspect="auto",
            extent=(0.5, m.shape[0] + 0.5, j_min - 0.5, j_min + m.shape[1] - 0.5),
            cmap="viridis",
            vmin=-16,
            vmax=0,
        )
        fig.colorbar(im, ax=ax, label="log10 relative mass")
        ax.set_xlabel("member n")
        ax.set_ylabel("annulus j")
        ax.grid(False)
        return _save(fig, path)
