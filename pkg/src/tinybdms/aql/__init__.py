"""The AQL frontend: lexer, parser, syntax tree, printer and resolver."""

from .parser import parse, parse_expression
from .printer import print_expr, print_statement, print_statements

__all__ = ["parse", "parse_expression", "print_expr", "print_statement", "print_statements"]
