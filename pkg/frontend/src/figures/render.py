"""Figure builders: pure post-processing of the simulation CSV tables.

No numeric data is computed or altered here. Every array handed to the
plotting backend is recorded and, after the figure is drawn, compared by
checksum against the column re-read from its CSV file; the output image is
written atomically (no partial file is left on error).
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .csvio import Table, array_checksum, column, read_table  # noqa: E402
from .recipes import REQUIRED_INPUTS, FigureRecipe  # noqa: E402

__all__ = ["RenderError", "render"]

PlottedColumn = Tuple[Table, str, np.ndarray]


class RenderError(RuntimeError):
    """Rendering failed after the inputs were validated."""


def render(recipe: FigureRecipe) -> Path:
    """Render the recipe's figure and return the output path."""
    tables = {role: read_table(path) for role, path in recipe.inputs.items()}
    builder = _BUILDERS[recipe.figure_id]
    fig, plotted = builder(tables, recipe)
    try:
        _verify_checksums(plotted)
        _atomic_save(fig, recipe.output, recipe.dpi)
    finally:
        plt.close(fig)
    return recipe.output


def _verify_checksums(plotted: List[PlottedColumn]) -> None:
    """The plotted arrays must be byte-identical to the CSV columns."""
    for table, name, values in plotted:
        fresh = column(read_table(table.path), name)
        if array_checksum(values) != array_checksum(fresh):
            raise RenderError(
                f"plotted data for column '{name}' does not match "
                f"{table.path}")


def _atomic_save(fig, output: Path, dpi: int) -> None:
    output.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=output.parent, suffix=output.suffix)
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=dpi, format=output.suffix.lstrip("."))
        os.replace(tmp, output)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _take(table: Table, names, plotted: List[PlottedColumn]):
    out = []
    for name in names:
        values = column(table, name)
        plotted.append((table, name, values))
        out.append(values)
    return out


def _fig2c(tables: Dict[str, Table], recipe: FigureRecipe):
    t = tables["dispersion"]
    plotted: List[PlottedColumn] = []
    k, f, g = _take(t, ["k_rad_per_m", "f_ghz", "coupling_abs"], plotted)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.plot(k, f, color="tab:blue")
    ax.set_xlabel(t.label("k_rad_per_m"))
    ax.set_ylabel(t.label("f_ghz"), color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(k, g, color="tab:red", linestyle="--")
    ax2.set_ylabel(t.label("coupling_abs"), color="tab:red")
    if recipe.log_x:
        ax.set_xscale("log")
    if recipe.title:
        ax.set_title(recipe.title)
    fig.tight_layout()
    return fig, plotted


def _fig2d(tables: Dict[str, Table], recipe: FigureRecipe):
    t = tables["coupling_map"]
    plotted: List[PlottedColumn] = []
    x, y, g = _take(t, ["x_nm", "y_nm", "coupling_abs"], plotted)
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    sc = ax.tripcolor(x, y, g, shading="gouraud", cmap="viridis")
    cs = ax.tricontour(x, y, g, levels=sorted(recipe.contour_levels),
                       colors="white", linewidths=0.8)
    ax.clabel(cs, inline=True, fontsize=7)
    fig.colorbar(sc, ax=ax, label=t.label("coupling_abs"))
    ax.set_xlabel(t.label("x_nm"))
    ax.set_ylabel(t.label("y_nm"))
    if recipe.title:
        ax.set_title(recipe.title)
    fig.tight_layout()
    return fig, plotted


def _fig4c(tables: Dict[str, Table], recipe: FigureRecipe):
    t = tables["coupling_map"]
    plotted: List[PlottedColumn] = []
    z, g, c = _take(t, ["z_nm", "g_over_2pi_khz", "cooperativity"], plotted)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.plot(z, g, color="tab:blue")
    ax.set_xlabel(t.label("z_nm"))
    ax.set_ylabel(t.label("g_over_2pi_khz"), color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(z, c, color="tab:green", linestyle="--")
    ax2.set_ylabel(t.label("cooperativity"), color="tab:green")
    if recipe.log_y:
        ax2.set_yscale("log")
    if recipe.title:
        ax.set_title(recipe.title)
    fig.tight_layout()
    return fig, plotted


_TRACE_POPULATIONS = ["p1e", "p2e", "n_mean"]
_TRACE_MEASURES = ["fidelity", "negativity_norm", "chsh"]


def _fig5(tables: Dict[str, Table], recipe: FigureRecipe):
    plotted: List[PlottedColumn] = []
    fig, axes = plt.subplots(2, 2, figsize=(8.0, 5.6), sharex="col")
    for col_idx, role in enumerate(("transduction", "exchange")):
        t = tables[role]
        (time,) = _take(t, ["t_us"], plotted)
        top, bottom = axes[0, col_idx], axes[1, col_idx]
        for name in _TRACE_POPULATIONS:
            (values,) = _take(t, [name], plotted)
            top.plot(time, values, label=name)
        for name in _TRACE_MEASURES:
            (values,) = _take(t, [name], plotted)
            bottom.plot(time, values, label=name)
        top.set_title(role)
        top.set_ylabel("population")
        bottom.set_ylabel("measure")
        bottom.set_xlabel(t.label("t_us"))
        top.legend(fontsize=7)
        bottom.legend(fontsize=7)
    if recipe.title:
        fig.suptitle(recipe.title)
    fig.tight_layout()
    return fig, plotted


def _phase_diagram(tables: Dict[str, Table], recipe: FigureRecipe):
    t = tables["phase_diagram"]
    plotted: List[PlottedColumn] = []
    alpha, gamma2, winner = _take(
        t, ["alpha", "gamma2", "winner"], plotted)
    # also validate the fidelity columns are present (they describe the map)
    _take(t, ["fid_onres", "fid_offres"], plotted)
    fig, ax = plt.subplots(figsize=(5, 4))
    sc = ax.scatter(gamma2, alpha, c=winner, cmap="coolwarm",
                    vmin=-1, vmax=1, s=60, edgecolors="k", linewidths=0.3)
    fig.colorbar(sc, ax=ax, label=t.label("winner"))
    ax.set_xlabel(t.label("gamma2"))
    ax.set_ylabel(t.label("alpha"))
    ax.set_yscale("log")
    if recipe.log_x:
        ax.set_xscale("log")
    if recipe.title:
        ax.set_title(recipe.title)
    fig.tight_layout()
    return fig, plotted


_BUILDERS = {
    "fig2c": _fig2c,
    "fig2d": _fig2d,
    "fig4c": _fig4c,
    "fig5": _fig5,
    "phase-diagram": _phase_diagram,
}

assert set(_BUILDERS) == set(REQUIRED_INPUTS)
