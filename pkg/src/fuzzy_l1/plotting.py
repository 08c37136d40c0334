"""Static SVG figures for traces and Pareto fronts."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed salt and no timestamp keep SVG output byte-stable
matplotlib.rcParams["svg.hashsalt"] = "fuzzy-l1"
_META = {"Date": None, "Creator": "fuzzy_l1"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def emit_plot(trace, path, title=None):
    """Four stacked panels: y vs r, u, K and e, both channels each."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    t = trace.t
    fig, ax = plt.subplots(4, 1, figsize=(7, 9), sharex=True)
    for c, ls in ((0, "-"), (1, "--")):
        ax[0].plot(t, trace.r[:, c], color="0.6", ls=ls, lw=1, label=f"r{c + 1}")
        ax[0].plot(t, trace.y[:, c], ls=ls, lw=1.2, label=f"y{c + 1}")
        ax[1].plot(t, trace.u[:, c], ls=ls, lw=1, label=f"u{c + 1}")
        ax[2].plot(t, trace.K[:, c], ls=ls, lw=1, label=f"K{c + 1}")
        ax[3].plot(t, trace.e[:, c], ls=ls, lw=1, label=f"e{c + 1}")
    for a, lab in zip(ax, ("output [rad]", "input", "filter gain K", "error [rad]")):
        a.set_ylabel(lab)
        a.grid(alpha=0.3)
        a.legend(loc="upper right", fontsize=7, ncol=4)
    ax[-1].set_xlabel("t [s]")
    if title or trace.meta.get("scenario"):
        name = title or trace.meta["scenario"]
        ax[0].set_title(name + (" (diverged)" if trace.diverged else ""))
    fig.tight_layout()
    _save(fig, path)


def emit_pareto_plot(entries, path, best=None, history=None):
    """E versus U scatter of a front, optionally over all evaluations."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if history:
        H = np.array([(E, U) for _, _, E, U, _ in history if E < 1e12])
        if len(H):
            ax.scatter(H[:, 1], H[:, 0], s=4, color="0.8", label="evaluated")
    F = np.array([o for _, o in entries], dtype=float).reshape(-1, 2)
    ax.scatter(F[:, 1], F[:, 0], s=14, label="Pareto set")
    if best is not None:
        ax.scatter([best[1][1]], [best[1][0]], marker="*", s=120, color="C3", label="best compromise")
    ax.set_xlabel("U = sum of peak |u|")
    ax.set_ylabel("E = sum of squared error")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
