"""Figure rendering for gneselect benchmark aggregates."""

from .render import FIGURES, FigureSpec, RenderError, load_aggregate, render, render_all

__version__ = "0.1.0"
