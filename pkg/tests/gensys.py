"""Deterministic generators for randomized and stress-scale systems.

Ground equation systems always complete or fail in bounded time (the
reachable term universe is finite), which makes them safe fodder for the
flag-agreement suites.  The unary-word systems cannot overlap at all, so
they complete by pure orientation.  The stress generators scale those two
shapes up for the performance and deduce-volume criteria.
"""

from __future__ import annotations

import random

from kbcomplete.terms import App, Symbol, Term, Var

UNARY = tuple(Symbol(name, 1) for name in ("f", "g", "h"))
BINARY = Symbol("b2", 2)
CONSTS = tuple(Symbol(name, 0) for name in ("a", "b", "c", "d"))


def ground_system(
    seed: int, n_equations: int = 4, depth: int = 3
) -> list[tuple[Term, Term]]:
    """Random ground equations over a small fixed signature."""
    rng = random.Random(seed)

    def gen(d: int) -> Term:
        if d == 0 or rng.random() < 0.3:
            return App(rng.choice(CONSTS))
        sym = rng.choice(UNARY + (BINARY,))
        return App(sym, tuple(gen(d - 1) for _ in range(sym.arity)))

    out = []
    for _ in range(n_equations):
        lhs = gen(depth)
        rhs = gen(rng.randint(0, max(0, depth - 2)))
        out.append((lhs, rhs))
    return out


def word_system(
    seed: int, n_rules: int = 5, depth: int = 4
) -> list[tuple[Term, Term]]:
    """Unary-symbol words over per-rule constants; rules never overlap."""
    rng = random.Random(seed)
    out = []
    for k in range(n_rules):
        const = App(Symbol(f"c{k}", 0))
        term: Term = const
        for _ in range(depth + rng.randint(0, 2)):
            term = App(rng.choice(UNARY), (term,))
        out.append((term, const))
    return out


def stress_completion_system(
    n_rules: int = 100, depth: int = 6, seed: int = 20240
) -> list[tuple[Term, Term]]:
    """Many deep-left-side ground equations over disjoint constants.

    No two left sides overlap, so a run is dominated by the scanning work
    that caching and indexing eliminate.
    """
    rng = random.Random(seed)
    symbols = tuple(Symbol(name, 1) for name in ("f", "g", "h", "p", "q"))
    out = []
    for k in range(n_rules):
        const = App(Symbol(f"c{k}", 0))
        term: Term = const
        for _ in range(depth + rng.randint(0, 2)):
            term = App(rng.choice(symbols), (term,))
        out.append((term, const))
    return out


def stress_overlap_rules(n_each: int = 230) -> list[tuple[Term, Term]]:
    """Two families whose members pairwise overlap at the root.

    Family one is first-projection rules keyed by a constant in the first
    argument; family two mirrors it on the second argument.  Every cross
    pair unifies at the root in both directions, yielding about
    ``2 * n_each**2`` critical pairs of constant size.
    """
    h = Symbol("h", 2)
    y = Var(0)
    out: list[tuple[Term, Term]] = []
    for k in range(n_each):
        out.append((App(h, (App(Symbol(f"a{k}", 0)), y)), y))
    for k in range(n_each):
        out.append((App(h, (y, App(Symbol(f"b{k}", 0)))), y))
    return out
