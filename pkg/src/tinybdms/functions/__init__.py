"""Builtin functions and operator semantics."""

from .aggregates import AGGREGATES, Aggregate
from .registry import BUILTINS, Builtin, list_functions, lookup

__all__ = ["AGGREGATES", "Aggregate", "BUILTINS", "Builtin", "list_functions", "lookup"]
