"""Topographic query language: parser, evaluator, reference oracle, plans."""

from .syntax import (
    ADJACENT,
    GAP,
    And,
    Atom,
    Block,
    BlockString,
    Gap,
    Not,
    Or,
    Query,
    parse,
)
from .evaluator import MatchTree, ResultSet, evaluate, iter_matches
from .oracle import brute_force_evaluate
from .plan import QueryPlan, explain

__all__ = [
    "ADJACENT",
    "GAP",
    "And",
    "Atom",
    "Block",
    "BlockString",
    "Gap",
    "MatchTree",
    "Not",
    "Or",
    "Query",
    "QueryPlan",
    "ResultSet",
    "brute_force_evaluate",
    "evaluate",
    "explain",
    "iter_matches",
    "parse",
]
