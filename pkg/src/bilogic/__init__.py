"""Workbench for the logic of bunched implications.

The top-level names cover the common batch workflow: parse, prove, check,
refute, and compare the provability and validity calculi.
"""

from .calculus import Proof, RuleId, RuleInstance, SearchPolicy, check_proof, taut_proof
from .search import Unproven, prove, reduce, space
from .semantics import Model, countermodel, satisfies, valid_in
from .syntax import parse_formula, parse_sequent
from .vbi import bisim_check, certify_vproof, vbi_prove

__version__ = "0.1.0"

__all__ = [
    "Model", "Proof", "RuleId", "RuleInstance", "SearchPolicy", "Unproven",
    "bisim_check", "certify_vproof", "check_proof", "countermodel",
    "parse_formula", "parse_sequent", "prove", "reduce", "satisfies",
    "space", "taut_proof", "valid_in", "vbi_prove",
]
