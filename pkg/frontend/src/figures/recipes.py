"""TOML figure recipes.

A recipe names the figure id, the output image path, the input CSV files
by role, and optional style settings, e.g.:

    [figure]
    id = "fig2d"
    output = "fig2d.png"

    [inputs]
    coupling_map = "out/coupling_map.csv"

    [style]
    contour_levels = [0.05, 0.1, 0.15, 0.2]
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

if sys.version_info >= (3, 11):
    import tomllib as tomli
else:
    import tomli

__all__ = ["RecipeError", "FigureRecipe", "load_recipe", "REQUIRED_INPUTS"]

# input roles each figure id consumes
REQUIRED_INPUTS: Dict[str, tuple] = {
    "fig2c": ("dispersion",),
    "fig2d": ("coupling_map",),
    "fig4c": ("coupling_map",),
    "fig5": ("transduction", "exchange"),
    "phase-diagram": ("phase_diagram",),
}

_SCHEMA = {
    "figure": {"id", "output"},
    "inputs": None,                 # free-form role -> path mapping
    "style": {"contour_levels", "log_x", "log_y", "title", "dpi"},
}

_DEFAULT_CONTOURS = [0.05, 0.1, 0.15, 0.2]


class RecipeError(ValueError):
    """The recipe file is malformed or incomplete."""


@dataclass(frozen=True)
class FigureRecipe:
    figure_id: str
    output: Path
    inputs: Dict[str, Path]
    contour_levels: List[float] = field(default_factory=lambda:
                                        list(_DEFAULT_CONTOURS))
    log_x: bool = False
    log_y: bool = False
    title: str = ""
    dpi: int = 150


def load_recipe(path) -> FigureRecipe:
    path = Path(path)
    try:
        tree = tomli.loads(path.read_text())
    except FileNotFoundError as exc:
        raise RecipeError(f"recipe not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise RecipeError(f"{path}: {exc}") from exc

    for section, body in tree.items():
        allowed = _SCHEMA.get(section, ...)
        if allowed is ...:
            raise RecipeError(f"unknown recipe section [{section}]")
        if not isinstance(body, dict):
            raise RecipeError(f"section [{section}] must be a table")
        if allowed is not None:
            for key in body:
                if key not in allowed:
                    raise RecipeError(f"unknown key '{section}.{key}'")

    fig = tree.get("figure", {})
    figure_id = fig.get("id")
    if figure_id not in REQUIRED_INPUTS:
        raise RecipeError(
            f"figure.id must be one of {sorted(REQUIRED_INPUTS)}, "
            f"got {figure_id!r}")
    output = fig.get("output")
    if not output:
        raise RecipeError("missing required key 'figure.output'")
    out_path = Path(output)
    if out_path.suffix.lower() not in (".png", ".svg"):
        raise RecipeError("figure.output must end in .png or .svg")
    if not out_path.is_absolute():
        out_path = path.parent / out_path

    raw_inputs = tree.get("inputs", {})
    inputs = {}
    for role, p in raw_inputs.items():
        if not isinstance(p, str):
            raise RecipeError(f"inputs.{role} must be a path string")
        ip = Path(p)
        inputs[role] = ip if ip.is_absolute() else path.parent / ip
    for role in REQUIRED_INPUTS[figure_id]:
        if role not in inputs:
            raise RecipeError(
                f"figure '{figure_id}' requires inputs.{role}")

    style = tree.get("style", {})
    levels = style.get("contour_levels", list(_DEFAULT_CONTOURS))
    if (not isinstance(levels, list) or not levels
            or not all(isinstance(x, (int, float)) for x in levels)):
        raise RecipeError("style.contour_levels must be a non-empty "
                          "list of numbers")
    dpi = style.get("dpi", 150)
    if not isinstance(dpi, int) or dpi < 10:
        raise RecipeError("style.dpi must be an integer >= 10")

    return FigureRecipe(
        figure_id=figure_id, output=out_path, inputs=inputs,
        contour_levels=[float(x) for x in levels],
        log_x=bool(style.get("log_x", False)),
        log_y=bool(style.get("log_y", False)),
        title=str(style.get("title", "")), dpi=dpi)
