"""Reduction orders for orienting equations.

Two internal orders (lexicographic path order and Knuth-Bendix order) with
greedy on-the-fly precedence construction, plus a child-process protocol
for delegating termination checks to an external tool.
"""

from __future__ import annotations

import itertools
import shlex
import subprocess
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Sequence

from kbcomplete import tpdb
from kbcomplete.terms import App, Symbol, Term, Var, var_counts, variables

#: Upper bound on the size of a precedence extension tried per orientation.
MAX_EXTENSION_PAIRS = 3
#: Upper bound on candidate extension sets examined per orientation.
MAX_EXTENSION_TRIES = 50_000


class InadmissibleWeightsError(Exception):
    """KBO weight assignment violates the admissibility side conditions."""


class ExternalToolError(Exception):
    """The external termination tool could not be spawned."""


class Precedence:
    """Strict partial order over symbols, stored transitively closed."""

    __slots__ = ("_gt",)

    def __init__(self, pairs: Iterable[tuple[Symbol, Symbol]] = ()):
        self._gt: frozenset[tuple[Symbol, Symbol]] = frozenset()
        closed = self._close(set(pairs))
        if closed is None:
            raise ValueError("precedence contains a cycle")
        self._gt = frozenset(closed)

    @staticmethod
    def _close(
        pairs: set[tuple[Symbol, Symbol]]
    ) -> set[tuple[Symbol, Symbol]] | None:
        closed = set(pairs)
        changed = True
        while changed:
            changed = False
            for (a, b), (c, d) in itertools.product(tuple(closed), repeat=2):
                if b == c and (a, d) not in closed:
                    closed.add((a, d))
                    changed = True
        if any(a == b for a, b in closed):
            return None
        return closed

    def gt(self, a: Symbol, b: Symbol) -> bool:
        return (a, b) in self._gt

    def pairs(self) -> frozenset[tuple[Symbol, Symbol]]:
        return self._gt

    def extended(
        self, new_pairs: Iterable[tuple[Symbol, Symbol]]
    ) -> "Precedence | None":
        """Precedence with extra pairs, or None if that breaks strictness."""
        closed = self._close(self._gt | set(new_pairs))
        if closed is None:
            return None
        out = Precedence.__new__(Precedence)
        out._gt = frozenset(closed)
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Precedence):
            return NotImplemented
        return self._gt == other._gt

    def __repr__(self) -> str:
        inner = ", ".join(
            f"{a.name}>{b.name}" for a, b in sorted(
                self._gt, key=lambda p: (p[0].name, p[1].name)
            )
        )
        return f"Precedence({inner})"


EMPTY_PRECEDENCE = Precedence()


@dataclass(frozen=True)
class KboWeights:
    """Variable weight plus per-symbol weights (default weight 1)."""

    w0: int = 1
    weights: Mapping[Symbol, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.w0 <= 0:
            raise InadmissibleWeightsError("variable weight must be positive")
        for sym, w in self.weights.items():
            if w < 0:
                raise InadmissibleWeightsError(f"negative weight for {sym!r}")

    def weight_of(self, sym: Symbol) -> int:
        return self.weights.get(sym, 1)

    def term_weight(self, t: Term) -> int:
        total = 0
        stack = [t]
        while stack:
            cur = stack.pop()
            if isinstance(cur, Var):
                total += self.w0
            else:
                total += self.weight_of(cur.sym)
                stack.extend(cur.args)
        return total

    def check_admissible(
        self, prec: Precedence, symbols: Iterable[Symbol]
    ) -> None:
        for sym in symbols:
            if sym.arity == 0 and self.weight_of(sym) < self.w0:
                raise InadmissibleWeightsError(
                    f"constant {sym!r} lighter than a variable"
                )
        for sym in symbols:
            if sym.arity == 1 and self.weight_of(sym) == 0:
                for a, b in prec.pairs():
                    if b == sym:
                        raise InadmissibleWeightsError(
                            f"weight-0 unary {sym!r} is not maximal"
                        )


def lpo_gt(prec: Precedence, s: Term, t: Term) -> bool:
    """Standard three-case lexicographic path order."""
    if isinstance(s, Var):
        return False
    if isinstance(t, Var):
        return t.vid in variables(s)
    for arg in s.args:  # subterm case: some s_i >= t
        if arg == t or lpo_gt(prec, arg, t):
            return True
    if prec.gt(s.sym, t.sym):  # precedence case
        return all(lpo_gt(prec, s, b) for b in t.args)
    if s.sym == t.sym:  # lexicographic case
        for k, (sa, ta) in enumerate(zip(s.args, t.args)):
            if sa == ta:
                continue
            if lpo_gt(prec, sa, ta):
                return all(lpo_gt(prec, s, tb) for tb in t.args[k + 1 :])
            return False
    return False


def kbo_gt(
    weights: KboWeights, prec: Precedence, s: Term, t: Term
) -> bool:
    """Standard Knuth-Bendix order: variable condition, weight, then
    precedence / lexicographic tie-break."""
    weights.check_admissible(prec, _symbols_in(s) | _symbols_in(t))
    return _kbo(weights, prec, s, t)


def _kbo(weights: KboWeights, prec: Precedence, s: Term, t: Term) -> bool:
    sc, tc = var_counts(s), var_counts(t)
    for vid, n in tc.items():
        if sc.get(vid, 0) < n:
            return False
    ws, wt = weights.term_weight(s), weights.term_weight(t)
    if ws > wt:
        return True
    if ws < wt:
        return False
    if isinstance(s, Var):
        return False
    if isinstance(t, Var):
        # equal weight over a lone variable: s must be a unary spine on t
        cur: Term = s
        while isinstance(cur, App) and cur.sym.arity == 1:
            cur = cur.args[0]
        return cur == t
    if prec.gt(s.sym, t.sym):
        return True
    if s.sym != t.sym:
        return False
    for sa, ta in zip(s.args, t.args):
        if sa == ta:
            continue
        return _kbo(weights, prec, sa, ta)
    return False


def _symbols_in(t: Term) -> set[Symbol]:
    out = set()
    stack = [t]
    while stack:
        cur = stack.pop()
        if isinstance(cur, App):
            out.add(cur.sym)
            stack.extend(cur.args)
    return out


OrderKind = Literal["lpo", "kbo"]


@dataclass
class OrderState:
    """Committed precedence of one completion run.

    Extensions are committed greedily and never retracted, so every rule
    oriented earlier stays oriented (both orders grow monotonically with
    the precedence).
    """

    kind: OrderKind = "lpo"
    prec: Precedence = field(default_factory=Precedence)
    weights: KboWeights = field(default_factory=KboWeights)
    symbol_order: list[Symbol] = field(default_factory=list)

    def note_symbols(self, symbols: Iterable[Symbol]) -> None:
        seen = set(self.symbol_order)
        for sym in symbols:
            if sym not in seen:
                seen.add(sym)
                self.symbol_order.append(sym)

    def gt(self, s: Term, t: Term) -> bool:
        if self.kind == "lpo":
            return lpo_gt(self.prec, s, t)
        return kbo_gt(self.weights, self.prec, s, t)

    def _gt_under(self, prec: Precedence, s: Term, t: Term) -> bool:
        if self.kind == "lpo":
            return lpo_gt(prec, s, t)
        return kbo_gt(self.weights, prec, s, t)

    def try_orient(
        self, s: Term, t: Term
    ) -> tuple[str, tuple[tuple[Symbol, Symbol], ...]] | None:
        """Search for a minimal precedence extension orienting s/t.

        Returns ("lr" | "rl", committed pairs) and commits the extension,
        or None when neither direction can be made to hold.  The left-to-
        right direction wins whenever both are orientable.
        """
        for direction, (lhs, rhs) in (("lr", (s, t)), ("rl", (t, s))):
            found = self._search_extension(lhs, rhs)
            if found is not None:
                prec, added = found
                self.prec = prec
                return direction, added
        return None

    def _search_extension(
        self, s: Term, t: Term
    ) -> tuple[Precedence, tuple[tuple[Symbol, Symbol], ...]] | None:
        if self._gt_under(self.prec, s, t):
            return self.prec, ()
        order = {sym: k for k, sym in enumerate(self.symbol_order)}
        candidates = [
            (a, b)
            for a in self.symbol_order
            for b in self.symbol_order
            if a != b and not self.prec.gt(a, b) and not self.prec.gt(b, a)
        ]
        candidates.sort(key=lambda p: (order[p[0]], order[p[1]]))
        tries = 0
        for size in range(1, min(MAX_EXTENSION_PAIRS, len(candidates)) + 1):
            for subset in itertools.combinations(candidates, size):
                tries += 1
                if tries > MAX_EXTENSION_TRIES:
                    return None
                extended = self.prec.extended(subset)
                if extended is None:
                    continue
                if self._gt_under(extended, s, t):
                    return extended, subset
        return None


Verdict = Literal["YES", "NO", "MAYBE"]


def external_terminates(
    command: str,
    rules: Sequence[tuple[Term, Term]],
    timeout: float | None = None,
) -> Verdict:
    """Ask an external tool whether the given rules terminate.

    The rule set is serialized in the classic problem format onto the
    tool's standard input; the first line of its output decides the
    verdict (case-insensitive YES/NO, anything else MAYBE).  A timeout is
    reported as MAYBE, a failure to spawn as :class:`ExternalToolError`.
    """
    text = tpdb.format_trs(rules)
    argv = shlex.split(command)
    if not argv:
        raise ExternalToolError("empty tool command")
    try:
        proc = subprocess.run(
            argv,
            input=text,
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired:
        return "MAYBE"
    except OSError as err:
        raise ExternalToolError(f"cannot spawn {argv[0]!r}: {err}") from err
    first = proc.stdout.splitlines()[0].strip().upper() if proc.stdout else ""
    if first == "YES":
        return "YES"
    if first == "NO":
        return "NO"
    return "MAYBE"
