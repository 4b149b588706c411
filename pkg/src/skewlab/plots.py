"""Matplotlib figures rendered next to the delimited report artifacts."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_displacement_profile(report, path: str) -> str:
    """Semi-log max-displacement profile with the decision thresholds."""
    fig, ax = plt.subplots(figsize=(7, 4))
    floor = 1e-18
    ax.semilogy(report.grid, np.maximum(report.max_displacement_profile, floor),
                lw=1.0, color="tab:blue", label="max |loop displacement|")
    ax.axhline(report.tol, color="tab:green", ls="--", lw=0.8,
               label=f"fixed below {report.tol:g}")
    ax.axhline(10.0 * report.tol, color="tab:red", ls="--", lw=0.8,
               label=f"moving above {10.0 * report.tol:g}")
    for a, b in report.fixed_intervals:
        ax.axvspan(a, min(b, 1.0), color="tab:green", alpha=0.15)
        if b > 1.0:
            ax.axvspan(0.0, b - 1.0, color="tab:green", alpha=0.15)
    ax.set_xlabel("fiber coordinate z")
    ax.set_ylabel("displacement")
    ax.set_xlim(0.0, 1.0)
    ax.legend(loc="best", fontsize=8)
    ax.set_title("su-loop displacement profile")
    return _finish(fig, path)


def save_component_means(decomp, path: str) -> str:
    """Per-component Birkhoff means of the test functions, with CLT bands."""
    fig, ax = plt.subplots(figsize=(7, 4))
    n_tests = len(decomp.test_names)
    for i, name in enumerate(decomp.test_names):
        xs, ys, errs = [], [], []
        for j, comp in enumerate(decomp.components):
            row = comp.table[i]
            xs.append(j + (i - 0.5 * (n_tests - 1)) * 0.06 / max(1, n_tests - 1))
            ys.append(row["mean"])
            errs.append(3.0 * row["clt_band"])
        ax.errorbar(xs, ys, yerr=errs, fmt="o", ms=3, capsize=2, label=name)
    ax.set_xticks(range(len(decomp.components)))
    ax.set_xticklabels([c.kind for c in decomp.components], fontsize=7)
    ax.set_xlabel("ergodic component")
    ax.set_ylabel("Birkhoff mean")
    ax.legend(loc="best", fontsize=7, ncol=2)
    ax.set_title("component means with 3x CLT bands")
    return _finish(fig, path)


def save_circle_map(lift, path: str, title: str = "circle map") -> str:
    xs = np.linspace(0.0, 1.0, 1024, endpoint=False)
    ys = np.mod(lift(xs), 1.0)
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].plot(xs, ys, ".", ms=1.5, color="tab:blue")
    axes[0].plot(xs, xs, lw=0.6, color="gray")
    axes[0].set_xlabel("x")
    axes[0].set_ylabel("f(x) mod 1")
    axes[0].set_title(title)
    axes[1].plot(xs, lift(xs) - xs, lw=1.0, color="tab:orange")
    axes[1].set_xlabel("x")
    axes[1].set_ylabel("lift displacement")
    axes[1].set_title("displacement")
    return _finish(fig, path)


def save_invariant_graphs(u_graph, c_graph, path: str) -> str:
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].plot(u_graph.xs, u_graph.values, lw=1.0, color="tab:blue")
    axes[0].set_title("unstable graph u")
    axes[0].set_xlabel("x")
    axes[1].plot(c_graph.xs, c_graph.values, lw=1.0, color="tab:red")
    axes[1].set_title("stable graph c")
    axes[1].set_xlabel("x")
    return _finish(fig, path)


def save_orbit(samples, path: str, title: str = "orbit") -> str:
    """samples: array (n, d+1) of base coordinates followed by fiber height."""
    samples = np.asarray(samples)
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.plot(samples[:, 0], samples[:, -1], ".", ms=1.0, alpha=0.5)
    ax.set_xlabel("base coordinate x")
    ax.set_ylabel("fiber coordinate z")
    ax.set_title(title)
    return _finish(fig, path)


def save_line_action(master, path: str, lo: float = -6.0, hi: float = 6.0) -> str:
    xs = np.linspace(lo, hi, 600)
    ps = np.array([master.P(x) for x in xs])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ps, lw=1.0, color="tab:blue", label="P")
    ax.axhline(0.0, color="gray", lw=0.6)
    ax.plot([master.fixed_point], [0.0], "r*", ms=10, label="fixed point")
    ax.set_xlabel("x")
    ax.set_ylabel("P(x)")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("master semiconjugacy")
    return _finish(fig, path)
