"""Interactive query clarification via label recommendation."""

__version__ = "0.1.0"
