"""Shared test helpers: a small fixed signature, hypothesis strategies for
random terms, and independent oracles the implementation is checked against.
"""

from __future__ import annotations

from hypothesis import strategies as st

from kbcomplete.terms import (
    App,
    Subst,
    Symbol,
    Term,
    Var,
    positions,
    variables,
)

F = Symbol("f", 2)
G = Symbol("g", 1)
H = Symbol("h", 2)
A = Symbol("a", 0)
B = Symbol("b", 0)
C = Symbol("c", 0)

SIG = (F, G, H, A, B, C)

x, y, z = Var(0), Var(1), Var(2)


def f(s, t):
    return App(F, (s, t))


def g(s):
    return App(G, (s,))


def h(s, t):
    return App(H, (s, t))


a = App(A)
b = App(B)
c = App(C)


def term_strategy(max_leaves: int = 12, n_vars: int = 3, sig=SIG):
    """Random terms over the fixed signature with a bounded leaf count."""
    constants = [App(s) for s in sig if s.arity == 0]
    leaves = st.sampled_from(
        constants + [Var(i) for i in range(n_vars)]
    )
    funs = [s for s in sig if s.arity > 0]

    def extend(children):
        return st.sampled_from(funs).flatmap(
            lambda s: st.tuples(*([children] * s.arity)).map(
                lambda args: App(s, args)
            )
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


# ---------------------------------------------------------------------------
# Rule-based unification oracle (decompose / orient / eliminate), written
# independently of the engine's work-list algorithm.


class OracleClash(Exception):
    pass


class OracleOccurs(Exception):
    pass


def _subst_one(t: Term, vid: int, repl: Term) -> Term:
    if isinstance(t, Var):
        return repl if t.vid == vid else t
    return App(t.sym, tuple(_subst_one(a, vid, repl) for a in t.args))


def oracle_unify(s: Term, t: Term) -> dict[int, Term]:
    """Martelli-Montanari style transformation on a set of equations."""
    eqs: list[tuple[Term, Term]] = [(s, t)]
    solved: dict[int, Term] = {}
    while eqs:
        lhs, rhs = eqs.pop()
        if lhs == rhs:
            continue
        if isinstance(lhs, App) and isinstance(rhs, App):
            if lhs.sym != rhs.sym:
                raise OracleClash(lhs.sym, rhs.sym)
            eqs.extend(zip(lhs.args, rhs.args))
            continue
        if isinstance(lhs, App):
            lhs, rhs = rhs, lhs
        assert isinstance(lhs, Var)
        if lhs.vid in variables(rhs):
            raise OracleOccurs(lhs.vid)
        eqs = [
            (_subst_one(l, lhs.vid, rhs), _subst_one(r, lhs.vid, rhs))
            for l, r in eqs
        ]
        solved = {
            v: _subst_one(u, lhs.vid, rhs) for v, u in solved.items()
        }
        solved[lhs.vid] = rhs
    return solved


def oracle_apply(sigma: dict[int, Term], t: Term) -> Term:
    if isinstance(t, Var):
        return sigma.get(t.vid, t)
    return App(t.sym, tuple(oracle_apply(sigma, a) for a in t.args))


# ---------------------------------------------------------------------------
# Brute-force critical-pair enumerator: all ordered rule pairs, all
# non-variable positions, plain unification.  Term-level operations only.


def oracle_critical_pairs(rules: dict[int, tuple[Term, Term]]) -> set:
    from kbcomplete.terms import (
        UnificationError,
        pair_key,
        rename_apart_many,
        replace_at,
        unify,
    )

    out = set()
    live = sorted(rules)
    for i in live:
        for j in live:
            lhs_j, rhs_j = rules[j]
            avoid = variables(lhs_j) | variables(rhs_j)
            lhs_i, rhs_i = rename_apart_many(rules[i], avoid)
            for pos, sub in positions(lhs_j):
                if isinstance(sub, Var):
                    continue
                if i == j and not pos:
                    continue
                try:
                    sigma = unify(lhs_i, sub)
                except UnificationError:
                    continue
                left = sigma.apply(replace_at(lhs_j, pos, rhs_i))
                right = sigma.apply(rhs_j)
                out.add(pair_key(left, right))
    return out


# ---------------------------------------------------------------------------
# Brute-force retrieval oracles for the term index.


def exact_matching_ids(stored: dict[int, Term], subject: Term) -> set[int]:
    from kbcomplete.terms import match

    return {i for i, t in stored.items() if match(t, subject) is not None}


def exact_unifiable_ids(stored: dict[int, Term], query: Term) -> set[int]:
    from kbcomplete.terms import UnificationError, rename_apart, unify

    out = set()
    qvars = variables(query)
    for i, t in stored.items():
        try:
            unify(rename_apart(t, qvars), query)
        except UnificationError:
            continue
        out.add(i)
    return out


def subst_equal(sub: Subst, mapping: dict[int, Term]) -> bool:
    clean = {
        v: t
        for v, t in mapping.items()
        if not (isinstance(t, Var) and t.vid == v)
    }
    return dict(sub.items()) == clean


def all_redexes(t: Term, rules) -> list[tuple[tuple[int, ...], int]]:
    """Every (position, rule index) pair at which some rule applies."""
    from kbcomplete.terms import match

    out = []
    for pos, sub in positions(t):
        if isinstance(sub, Var):
            continue
        for idx in sorted(rules):
            lhs, _ = rules[idx]
            if match(lhs, sub) is not None:
                out.append((pos, idx))
    return out
