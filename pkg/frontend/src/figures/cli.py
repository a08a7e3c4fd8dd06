"""Command-line interface: ``figures render --recipe PATH``.

Exit codes: 0 success, 2 recipe/schema/input error, 3 rendering error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .csvio import SchemaError
from .recipes import RecipeError, load_recipe
from .render import RenderError, render

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figures",
        description="Render figures from simulation CSV outputs.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    p = sub.add_parser("render", help="render one figure from a recipe")
    p.add_argument("--recipe", required=True,
                   help="path to a TOML figure recipe")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        recipe = load_recipe(args.recipe)
        output = render(recipe)
    except (RecipeError, SchemaError) as exc:
        print(f"recipe error: {exc}", file=sys.stderr)
        return 2
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
