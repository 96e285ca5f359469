"""Contractive Markov systems: coding maps, invariant measures, shift measures."""
from .builtins import builtin
from .coding import coding_eval, error_bound
from .config import load_system, parse_system
from .graph import CodeWindow, DirectedMultigraph
from .measure import EmpiricalMeasure, adjoint_push, estimate_invariant, markov_apply
from .system import MarkovSystem
from .validation import estimate_contraction_rate, validate_system

__all__ = [
    "builtin",
    "coding_eval",
    "error_bound",
    "load_system",
    "parse_system",
    "CodeWindow",
    "DirectedMultigraph",
    "EmpiricalMeasure",
    "adjoint_push",
    "estimate_invariant",
    "markov_apply",
    "MarkovSystem",
    "estimate_contraction_rate",
    "validate_system",
]
