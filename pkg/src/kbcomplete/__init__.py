"""Knuth-Bendix completion engine.

Transforms a finite set of equations into an equivalent terminating and
confluent term rewrite system.  Three performance layers can be toggled
independently and never change results: result caching, phase-internal
parallelization, and discrimination-tree term indexing.

>>> from kbcomplete import Config, complete, parse_problem
>>> problem = parse_problem("(VAR x) (RULES f(f(x)) -> g(x))")
>>> result = complete(problem.equations, Config(timeout=10))
>>> result.verdict
'success'
"""

from kbcomplete.completion import (
    Backend,
    Config,
    CriticalPair,
    Fail,
    Overlap,
    Success,
    Timeout,
    complete,
    critical_pairs_between,
)
from kbcomplete.proof import build_trace, from_xml, replay, to_xml
from kbcomplete.terms import App, Subst, Symbol, Term, Var
from kbcomplete.tpdb import format_problem, format_trs, parse_problem

__all__ = [
    "App",
    "Backend",
    "Config",
    "CriticalPair",
    "Fail",
    "Overlap",
    "Subst",
    "Success",
    "Symbol",
    "Term",
    "Timeout",
    "Var",
    "build_trace",
    "complete",
    "critical_pairs_between",
    "format_problem",
    "format_trs",
    "from_xml",
    "parse_problem",
    "replay",
    "to_xml",
]
