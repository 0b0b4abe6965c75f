"""Figure renderer for epigame summary CSVs."""

from .render import SchemaError, load_summary, render_panel

__version__ = "0.1.0"

__all__ = ["SchemaError", "load_summary", "render_panel"]
