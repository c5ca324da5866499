"""Minimal stdin/stdout termination checker.

Reads a `(VAR ...) (RULES ...)` system on standard input and prints one
line: YES when the rules can be jointly oriented by a lexicographic path
order (hence terminate), NO when a rule is nonterminating on its own
shape (variable left-hand side or an extra right-hand-side variable), and
MAYBE otherwise.  Useful as a self-contained external tool for the
completion engine's ``-m`` option, e.g.::

    kbcomplete -a -m "python -m kbcomplete.termtool" input.trs
"""

from __future__ import annotations

import itertools
import sys

from kbcomplete.orders import OrderState, Precedence, lpo_gt
from kbcomplete.tpdb import ParseError, parse_problem
from kbcomplete.terms import Term, Var, variables

_PERMUTATION_LIMIT = 7


def check(rules: list[tuple[Term, Term]], symbols) -> str:
    for lhs, rhs in rules:
        if isinstance(lhs, Var) or not variables(rhs) <= variables(lhs):
            return "NO"
    if not rules:
        return "YES"
    state = OrderState(kind="lpo")
    state.note_symbols(symbols)
    greedy_ok = True
    for lhs, rhs in rules:
        found = state._search_extension(lhs, rhs)
        if found is None:
            greedy_ok = False
            break
        state.prec = found[0]
    if greedy_ok:
        return "YES"
    if len(symbols) <= _PERMUTATION_LIMIT:
        for perm in itertools.permutations(symbols):
            prec = Precedence(
                (a, b) for k, a in enumerate(perm) for b in perm[k + 1 :]
            )
            if all(lpo_gt(prec, l, r) for l, r in rules):
                return "YES"
    return "MAYBE"


def main() -> int:
    text = sys.stdin.read()
    try:
        problem = parse_problem(text)
    except ParseError:
        print("MAYBE")
        return 0
    print(check(list(problem.equations), list(problem.symbols)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
