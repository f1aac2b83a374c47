"""Query compilation: translation, rewrite rules and job generation."""

from .plan import explain
from .rules import optimize, physical
from .translate import Translator

__all__ = ["Translator", "explain", "optimize", "physical"]
