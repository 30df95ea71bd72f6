"""Matplotlib renderings written next to the delimited outputs.

All figures go through the Agg backend and a fixed style so repeated runs
produce byte-identical PNG files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

DPI = 110


def _new_axes(title: str, xlabel: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path) -> None:
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)


def save_paths_figure(path, times, price_paths, expected, most_probable) -> None:
    """Sampled price paths with the closed-form mean and typical-path curves."""
    fig, ax = _new_axes("Sampled price paths", "time", "price")
    for series in price_paths:
        ax.plot(times, series, lw=0.7, alpha=0.6)
    ax.plot(times, expected, "k-", lw=1.8, label="expected price")
    ax.plot(times, most_probable, "k--", lw=1.8, label="most probable path")
    ax.legend()
    _save(fig, path)


def save_terminal_figure(path, terminals, closed_mean, most_probable) -> None:
    """Terminal price histogram with closed-form markers."""
    fig, ax = _new_axes("Terminal price distribution", "terminal price", "count")
    ax.hist(terminals, bins=80, color="#4878a8", alpha=0.8)
    ax.axvline(closed_mean, color="k", lw=1.6, label="expected price")
    ax.axvline(most_probable, color="k", ls="--", lw=1.6, label="most probable path")
    ax.legend()
    _save(fig, path)


def save_density_figure(path, grid, dens, label: str) -> None:
    """Kernel density curve for a cross-section of bubble ratios."""
    fig, ax = _new_axes(f"Density of bubble ratios ({label})", "kappa", "density")
    ax.plot(grid, dens, lw=1.5)
    ax.fill_between(grid, dens, alpha=0.25)
    _save(fig, path)


def save_regression_figure(path, result, label: str) -> None:
    """Coefficient estimates with 2-standard-error bars."""
    fig, ax = _new_axes(f"Regression coefficients ({label})", "", "estimate")
    pos = np.arange(len(result.names))
    ax.bar(pos, result.estimates, yerr=2.0 * result.stderr,
           color="#4878a8", alpha=0.8, capsize=3)
    ax.set_xticks(pos)
    ax.set_xticklabels(result.names, rotation=45, ha="right", fontsize=8)
    ax.axhline(0.0, color="k", lw=0.8)
    _save(fig, path)


def save_uncertainty_figure(path, grid, velocity, label: str) -> None:
    """Density and its velocity field on twin axes."""
    fig, ax = _new_axes(f"Density and velocity field ({label})", "x", "P(x)")
    ax.plot(grid.x, grid.p, lw=1.5, color="#4878a8", label="P(x)")
    ax2 = ax.twinx()
    ax2.plot(grid.x, velocity, lw=1.2, color="#b05050", label="v(x)")
    ax2.set_ylabel("v(x)")
    lines = ax.get_lines() + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], loc="upper right")
    _save(fig, path)
