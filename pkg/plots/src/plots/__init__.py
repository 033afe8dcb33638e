"""CSV-to-figure rendering for the multidefender experiment outputs."""

from .figures import KINDS, FigureError, FigureSpec, load_table, render

__all__ = ["KINDS", "FigureError", "FigureSpec", "load_table", "render"]
