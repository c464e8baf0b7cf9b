"""Figures written next to the CSV output of the CLI."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_probes(times, series: dict, path, moisture_label="moisture"):
    """Two stacked panels: temperature and moisture variable at each probe."""
    t = np.asarray(times) / 3600.0
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5.5))
    for name, v in series.items():
        v = np.asarray(v)
        ax1.plot(t, v[:, 0], label=name)
        ax2.plot(t, v[:, 1], label=name)
    ax1.set_ylabel("temperature (K)")
    ax2.set_ylabel(moisture_label)
    ax2.set_xlabel("time (h)")
    if series:
        ax1.legend(fontsize="small", loc="best")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_convergence(table, path):
    """Log-log error against h (finest h_t) and against h_t (finest h)."""
    hs = sorted({r[0] for r in table.rows})
    hts = sorted({r[1] for r in table.rows})
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    panels = (
        (axes[0], hs, [table.error(h, hts[0]) for h in hs], "h", 2),
        (axes[1], hts, [table.error(hs[0], ht) for ht in hts], "h_t", 1),
    )
    for ax, x, e, label, order in panels:
        x, e = np.asarray(x), np.asarray(e)
        ok = e > 0
        if ok.any():
            ax.loglog(x[ok], e[ok], "o-", label="nodal L2 error")
            ref = e[ok][-1] * (x[ok] / x[ok][-1]) ** order
            ax.loglog(x[ok], ref, "k--", lw=0.8, label=f"slope {order}")
            ax.legend(fontsize="small")
        ax.set_xlabel(label)
        ax.grid(alpha=0.3, which="both")
    axes[0].set_ylabel("error at final time")
    fig.suptitle(f"convergence: {table.case}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_ratios(reports, path):
    """Largest Picard update ratio and iteration count per step."""
    n = np.arange(1, len(reports) + 1)
    rmax = [max(r.contraction_ratios) if r.contraction_ratios else np.nan for r in reports]
    iters = [r.picard_iters for r in reports]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.semilogy(n, rmax, ".", label="max ratio")
    ax.axhline(1.0, color="k", lw=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("contraction ratio")
    ax2 = ax.twinx()
    ax2.plot(n, iters, color="tab:orange", lw=0.8)
    ax2.set_ylabel("Picard iterations", color="tab:orange")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
