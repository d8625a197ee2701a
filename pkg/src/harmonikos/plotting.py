"""Small matplotlib helper for report figures (Agg backend)."""

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

golden = (np.sqrt(5) - 1.0) / 2.0
width = 4.8

params = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "figure.figsize": (width, width * golden),
    "figure.dpi": 120,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "mathtext.fontset": "stix",
}
plt.rcParams.update(params)


def new(nrows=1, ncols=1, **kw):
    """Fresh figure and axes with the module defaults."""
    return plt.subplots(nrows, ncols, **kw)


def save(path, fig=None):
    fig = fig or plt.gcf()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def residual_bars(report, path, title=""):
    """Horizontal bar chart of log10 max residuals against their tolerances."""
    names = sorted(report.entries)
    vals = [max(report.entries[k]["max"], 1e-18) for k in names]
    tols = [report.entries[k]["tol"] for k in names]
    fig, ax = new(figsize=(width, 0.25 * len(names) + 1.0))
    y = range(len(names))
    ax.barh(y, vals, color=["C0" if report.entries[k]["pass"] else "C3" for k in names])
    for i, t in enumerate(tols):
        if t is not None:
            ax.plot([t, t], [i - 0.4, i + 0.4], "k-", lw=1)
    ax.set_xscale("log")
    ax.set_yticks(list(y))
    ax.set_yticklabels(names)
    ax.set_xlabel("max residual")
    if title:
        ax.set_title(title)
    return save(path, fig)


def convergence(ks, devs, path, rate=None):
    fig, ax = new()
    ax.loglog(ks, devs, "o-", label="deviation")
    if rate is not None and len(ks) and devs[0] > 0:
        ref = [devs[0] * (k / ks[0]) ** rate for k in ks]
        ax.loglog(ks, ref, "--", label=f"slope {rate:.3f}")
    ax.set_xlabel("k")
    ax.set_ylabel(r"$\|F^{(k)} - F^{(\infty)}\|_{C^0}$")
    ax.legend()
    return save(path, fig)
