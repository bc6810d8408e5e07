"""Mover logic: a finite-domain verifier and interleaving explorer for
multithreaded programs annotated with mover specifications."""

__version__ = "0.1.0"

from .checker import Report, check_program
from .effects import Effect
from .explorer import compare_schedulers, explore
from .movers import check_validity
from .parser import parse, parse_file, print_program
from .wellformed import well_formed

__all__ = [
    "Effect",
    "Report",
    "check_program",
    "check_validity",
    "compare_schedulers",
    "explore",
    "parse",
    "parse_file",
    "print_program",
    "well_formed",
]
