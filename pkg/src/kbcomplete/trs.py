"""Indexed equations and rules, rewriting to normal form.

Rules and equations are immutable; any modification re-issues the object
under a fresh index.  That convention is what lets the completion caches
skip invalidation logic entirely: a changed rule has a new index and
therefore no cache history.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterator

from kbcomplete.termindex import DiscriminationTree
from kbcomplete.terms import (
    App,
    Position,
    Subst,
    Term,
    Var,
    match,
    positions,
    replace_at,
    subterm_at,
    term_size,
    variables,
    variant,
)


class InvalidRuleError(Exception):
    """Left-hand side is a variable or the right-hand side adds variables."""


class StepBoundExceededError(Exception):
    """Safety net: a normalization ran away, which signals a soundness bug
    or an unsound external termination verdict."""


class BudgetExceeded(Exception):
    """The wall-clock budget of the current run elapsed."""


class Deadline:
    """Absolute wall-clock deadline shared across workers via its epoch."""

    __slots__ = ("at",)

    def __init__(self, at: float | None = None):
        self.at = at

    @classmethod
    def after(cls, seconds: float | None) -> "Deadline":
        return cls(None if seconds is None else time.time() + seconds)

    def expired(self) -> bool:
        return self.at is not None and time.time() >= self.at

    def check(self) -> None:
        if self.expired():
            raise BudgetExceeded()

    def remaining(self) -> float | None:
        if self.at is None:
            return None
        return max(0.0, self.at - time.time())


NO_DEADLINE = Deadline(None)


@dataclass(frozen=True, slots=True)
class Equation:
    index: int
    lhs: Term
    rhs: Term

    def size(self) -> int:
        return term_size(self.lhs) + term_size(self.rhs)


@dataclass(frozen=True, slots=True)
class Rule:
    index: int
    lhs: Term
    rhs: Term

    def __post_init__(self) -> None:
        if isinstance(self.lhs, Var):
            raise InvalidRuleError("rule left-hand side is a variable")
        if not variables(self.rhs) <= variables(self.lhs):
            raise InvalidRuleError(
                "right-hand side introduces variables not in the left"
            )


@dataclass(frozen=True, slots=True)
class RewriteStep:
    """One rewrite: rule applied at a position with the given matcher."""

    rule_index: int
    position: Position
    matcher: Subst
    result: Term


class IndexAllocator:
    """Monotone source of unique positive indices, shared between the
    equation and rule sets of one run."""

    __slots__ = ("_next",)

    def __init__(self, start: int = 1):
        self._next = start

    def take(self) -> int:
        out = self._next
        self._next += 1
        return out

    def peek(self) -> int:
        return self._next


class EquationSet:
    __slots__ = ("_eqs", "alloc")

    def __init__(self, alloc: IndexAllocator):
        self._eqs: dict[int, Equation] = {}
        self.alloc = alloc

    def add(self, lhs: Term, rhs: Term) -> Equation:
        eq = Equation(self.alloc.take(), lhs, rhs)
        self._eqs[eq.index] = eq
        return eq

    def remove(self, index: int) -> Equation:
        return self._eqs.pop(index)

    def get(self, index: int) -> Equation:
        return self._eqs[index]

    def __contains__(self, index: int) -> bool:
        return index in self._eqs

    def __len__(self) -> int:
        return len(self._eqs)

    def indices(self) -> list[int]:
        return sorted(self._eqs)

    def __iter__(self) -> Iterator[Equation]:
        for idx in sorted(self._eqs):
            yield self._eqs[idx]


class RuleSet:
    """Rules keyed by index with a discrimination tree over left sides.

    The tree is kept in exact correspondence with the rule map whether or
    not indexing is consulted, so flipping the indexing flag can never
    change observable behavior, only retrieval cost.
    """

    __slots__ = ("_rules", "tree", "alloc")

    def __init__(self, alloc: IndexAllocator):
        self._rules: dict[int, Rule] = {}
        self.tree = DiscriminationTree()
        self.alloc = alloc

    def add(self, lhs: Term, rhs: Term) -> Rule:
        rule = Rule(self.alloc.take(), lhs, rhs)
        self._rules[rule.index] = rule
        self.tree.insert(rule.index, rule.lhs)
        return rule

    def remove(self, index: int) -> Rule:
        rule = self._rules.pop(index)
        self.tree.remove(index, rule.lhs)
        return rule

    def get(self, index: int) -> Rule:
        return self._rules[index]

    def __contains__(self, index: int) -> bool:
        return index in self._rules

    def __len__(self) -> int:
        return len(self._rules)

    def indices(self) -> list[int]:
        return sorted(self._rules)

    def __iter__(self) -> Iterator[Rule]:
        for idx in sorted(self._rules):
            yield self._rules[idx]

    def pairs(self) -> list[tuple[Term, Term]]:
        return [(r.lhs, r.rhs) for r in self]


def _postorder(t: Term) -> list[tuple[Position, Term]]:
    """Positions in leftmost-innermost visiting order."""
    out: list[tuple[Position, Term]] = []
    stack: list[tuple[Position, Term]] = [((), t)]
    while stack:
        pos, cur = stack.pop()
        out.append((pos, cur))
        if isinstance(cur, App):
            for k, arg in enumerate(cur.args):
                stack.append((pos + (k + 1,), arg))
    out.reverse()
    return out


def rewrite_once(
    t: Term,
    rules: RuleSet,
    use_index: bool = True,
    allowed: frozenset[int] | set[int] | None = None,
) -> RewriteStep | None:
    """First applicable rewrite step, or None when ``t`` is a normal form.

    The strategy is total and deterministic: leftmost-innermost position
    order with ascending rule indices as the tie-break.  With indexing on,
    candidates come from the discrimination tree and are post-checked with
    a real match, so both modes return the identical step.
    """
    # a handful of allowed rules is cheaper to match directly than to
    # filter through per-position index retrievals
    direct = allowed is not None and len(allowed) <= 4
    for pos, sub in _postorder(t):
        if isinstance(sub, Var):
            continue
        if direct:
            candidates = sorted(allowed)
        elif use_index:
            candidates = sorted(rules.tree.candidates_matching(sub))
        else:
            candidates = rules.indices()
        for idx in candidates:
            if allowed is not None and idx not in allowed:
                continue
            rule = rules.get(idx)
            sigma = match(rule.lhs, sub)
            if sigma is None:
                continue
            result = replace_at(t, pos, sigma.apply(rule.rhs))
            return RewriteStep(idx, pos, sigma, result)
    return None


def normalize(
    t: Term,
    rules: RuleSet,
    use_index: bool = True,
    step_bound: int = 100_000,
    deadline: Deadline = NO_DEADLINE,
    allowed: frozenset[int] | set[int] | None = None,
) -> tuple[Term, tuple[RewriteStep, ...]]:
    """Rewrite to normal form, returning the full step trace.

    Raises :class:`StepBoundExceededError` past ``step_bound`` steps and
    :class:`BudgetExceeded` when the deadline passes mid-normalization.
    """
    steps: list[RewriteStep] = []
    cur = t
    while True:
        step = rewrite_once(cur, rules, use_index, allowed=allowed)
        if step is None:
            return cur, tuple(steps)
        steps.append(step)
        cur = step.result
        if len(steps) > step_bound:
            raise StepBoundExceededError(
                f"no normal form within {step_bound} steps; "
                "the rule set is not terminating"
            )
        deadline.check()


def encompassment_strict(s: Term, l: Term) -> bool:
    """True iff some subterm of ``s`` is an instance of ``l`` while ``s``
    and ``l`` are not variants (the collapse side condition)."""
    if variant(s, l):
        return False
    return any(
        not isinstance(sub, Var) and match(l, sub) is not None
        for _, sub in positions(s)
    )


def validate_rewrite_step(t: Term, step: RewriteStep, rules: RuleSet) -> bool:
    """Check a recorded step against its defining equations."""
    if step.rule_index not in rules:
        return False
    rule = rules.get(step.rule_index)
    try:
        sub = subterm_at(t, step.position)
    except Exception:
        return False
    sigma = match(rule.lhs, sub)
    if sigma is None or sigma != step.matcher:
        return False
    expected = replace_at(t, step.position, sigma.apply(rule.rhs))
    return expected == step.result
