"""Standalone SVG figures (matplotlib, Agg backend)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def overlay_1d(path, x, truth, mean, lower=None, upper=None, title=""):
    """Truth, predictive mean and (optional) confidence band for one 1D sample."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if lower is not None:
        ax.fill_between(x, lower, upper, color="tab:blue", alpha=0.25, label="95% band")
    ax.plot(x, truth, "k-", lw=1.5, label="truth")
    ax.plot(x, mean, "--", color="tab:red", lw=1.5, label="GPO mean")
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def overlay_2d(path, truth, mean, std=None, title=""):
    """Truth, mean, absolute error and (optional) standard deviation panels."""
    panels = [("truth", truth), ("GPO mean", mean), ("|error|", np.abs(mean - truth))]
    if std is not None:
        panels.append(("std", std))
    fig, axes = plt.subplots(1, len(panels), figsize=(3.2 * len(panels), 3))
    for ax, (name, img) in zip(axes, panels):
        im = ax.imshow(np.asarray(img).T, origin="lower", extent=(0, 1, 0, 1), cmap="viridis")
        ax.set_title(name, fontsize=9)
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.suptitle(title, fontsize=10)
    return _save(fig, path)


def sweep_plot(path, axis, summary):
    v = np.asarray(summary["values"])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.fill_between(v, 100 * summary["low"], 100 * summary["high"], alpha=0.25, color="tab:blue")
    ax.plot(v, 100 * summary["median"], "o-", color="tab:blue", label="median over seeds")
    ax.set_xscale("log", base=2)
    ax.set_xlabel(axis)
    ax.set_ylabel("relative L2 error [%]")
    ax.set_title(f"error vs {axis} (slope {summary['slope']:.3g} per doubling)", fontsize=9)
    ax.legend(fontsize=8)
    return _save(fig, path)


def trace_plot(path, trace):
    t = np.asarray(trace, dtype=float)
    sdd = t[t[:, 0] > 0]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if len(sdd):
        ok = np.isfinite(sdd[:, 1])
        ax.semilogy(sdd[ok, 0], sdd[ok, 1], "-", label="primal loss")
        ax.semilogy(sdd[:, 0], sdd[:, 2], "-", alpha=0.4, label="|G_t|")
    ax.set_xlabel("SDD step")
    ax.legend(fontsize=8)
    return _save(fig, path)
