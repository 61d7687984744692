"""Figures for multichannel change-detection benchmark sweeps."""

from .figures import (
    Curve,
    EmptyFilterError,
    FigureSpec,
    SchemaError,
    extract_cost_bars,
    extract_tradeoff,
    read_rows,
    render,
)

__version__ = "0.1.0"
