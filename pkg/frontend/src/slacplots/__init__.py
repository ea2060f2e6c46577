"""Figure rendering for slacsim benchmark CSV outputs."""

from slacplots.render import FigureRequest, SchemaMismatch, render

__all__ = ["FigureRequest", "SchemaMismatch", "render"]
