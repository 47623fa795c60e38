"""Figure rendering for cvkeyrate CSV sweeps."""

from .render import FigureSpec, SchemaError, Series, plottable, read_series, render

__all__ = ["FigureSpec", "SchemaError", "Series", "plottable", "read_series", "render"]
