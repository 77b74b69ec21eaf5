"""Figure rendering for epidemic trace bundles."""
from .render import (FigureSpec, Series, SpecError, load_spec, main,
                     read_trace, render)

__all__ = ["FigureSpec", "Series", "SpecError", "load_spec", "main",
           "read_trace", "render"]
__version__ = "1.0.0"
