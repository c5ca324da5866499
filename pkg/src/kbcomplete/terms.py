"""First-order terms, positions, substitutions, unification and matching.

Terms are immutable values; equal subterms may be shared freely between
data structures and across worker processes.  Variables are interned
integers so that renaming apart is a cheap arithmetic operation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence, Union


class InvalidPositionError(Exception):
    """A position does not address a subterm of the given term."""


class UnificationError(Exception):
    """Base class for unification failures."""


class ClashError(UnificationError):
    """Two distinct function symbols met at the same position."""


class OccursCheckError(UnificationError):
    """A variable would have to contain itself."""


@dataclass(frozen=True, slots=True)
class Symbol:
    """Function symbol with a fixed arity."""

    name: str
    arity: int

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("symbol name must be non-empty")
        if self.arity < 0:
            raise ValueError(f"negative arity for {self.name!r}")

    def __repr__(self) -> str:
        return f"{self.name}/{self.arity}"


@dataclass(frozen=True, slots=True)
class Var:
    """Variable identified by an interned non-negative integer."""

    vid: int

    def __repr__(self) -> str:
        return f"x{self.vid}"


@dataclass(frozen=True, slots=True)
class App:
    """Application of a symbol to exactly ``symbol.arity`` arguments."""

    sym: Symbol
    args: tuple["Term", ...] = ()

    def __post_init__(self) -> None:
        if len(self.args) != self.sym.arity:
            raise ValueError(
                f"{self.sym!r} applied to {len(self.args)} arguments"
            )

    def __repr__(self) -> str:
        if not self.args:
            return self.sym.name
        return f"{self.sym.name}({','.join(map(repr, self.args))})"


Term = Union[Var, App]

#: A position is a path of 1-based argument indices; () addresses the root.
Position = tuple[int, ...]

ROOT: Position = ()


def positions(t: Term) -> Iterator[tuple[Position, Term]]:
    """Yield every (position, subterm) pair of ``t`` in preorder."""
    stack: list[tuple[Position, Term]] = [(ROOT, t)]
    while stack:
        pos, cur = stack.pop()
        yield pos, cur
        if isinstance(cur, App):
            for k in range(len(cur.args) - 1, -1, -1):
                stack.append((pos + (k + 1,), cur.args[k]))


def subterm_at(t: Term, pos: Position) -> Term:
    """Return the subterm of ``t`` rooted at ``pos``."""
    cur = t
    for step in pos:
        if not isinstance(cur, App) or not 1 <= step <= len(cur.args):
            raise InvalidPositionError(f"position {pos} not in {t!r}")
        cur = cur.args[step - 1]
    return cur


def replace_at(t: Term, pos: Position, s: Term) -> Term:
    """Return ``t`` with the subterm at ``pos`` replaced by ``s``."""
    if not pos:
        return s
    spine: list[App] = []
    cur = t
    for step in pos:
        if not isinstance(cur, App) or not 1 <= step <= len(cur.args):
            raise InvalidPositionError(f"position {pos} not in {t!r}")
        spine.append(cur)
        cur = cur.args[step - 1]
    result = s
    for step, node in zip(reversed(pos), reversed(spine)):
        args = node.args[: step - 1] + (result,) + node.args[step:]
        result = App(node.sym, args)
    return result


def term_size(t: Term) -> int:
    """Number of symbol and variable occurrences in ``t``."""
    n = 0
    stack = [t]
    while stack:
        cur = stack.pop()
        n += 1
        if isinstance(cur, App):
            stack.extend(cur.args)
    return n


def variables(t: Term) -> set[int]:
    """The set of variable identifiers occurring in ``t``."""
    out: set[int] = set()
    stack = [t]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Var):
            out.add(cur.vid)
        else:
            stack.extend(cur.args)
    return out


def var_counts(t: Term) -> dict[int, int]:
    """Occurrence count per variable identifier."""
    out: dict[int, int] = {}
    stack = [t]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Var):
            out[cur.vid] = out.get(cur.vid, 0) + 1
        else:
            stack.extend(cur.args)
    return out


def symbols_of(t: Term) -> Iterator[Symbol]:
    """Yield the symbols of ``t`` in preorder (with repetitions)."""
    stack = [t]
    while stack:
        cur = stack.pop()
        if isinstance(cur, App):
            yield cur.sym
            for k in range(len(cur.args) - 1, -1, -1):
                stack.append(cur.args[k])


def _rebuild(t: Term, mapping: Mapping[int, Term]) -> Term:
    """Replace variables of ``t`` per ``mapping``, sharing untouched nodes.

    Iterative so that very deep terms cannot overflow the call stack.
    """
    memo: dict[int, Term] = {}
    stack: list[Term] = [t]
    while stack:
        cur = stack[-1]
        if id(cur) in memo:
            stack.pop()
            continue
        if isinstance(cur, Var):
            memo[id(cur)] = mapping.get(cur.vid, cur)
            stack.pop()
            continue
        pending = [a for a in cur.args if id(a) not in memo]
        if pending:
            stack.extend(pending)
            continue
        new_args = tuple(memo[id(a)] for a in cur.args)
        if all(n is o for n, o in zip(new_args, cur.args)):
            memo[id(cur)] = cur
        else:
            memo[id(cur)] = App(cur.sym, new_args)
        stack.pop()
    return memo[id(t)]


class Subst:
    """Finite map from variable identifiers to terms.

    Identity bindings are dropped on construction.  Substitutions returned
    by :func:`unify` are idempotent; matchers returned by :func:`match` are
    idempotent whenever pattern and subject variables are disjoint.
    """

    __slots__ = ("_map",)

    def __init__(self, bindings: Mapping[int, Term] | None = None):
        m: dict[int, Term] = {}
        if bindings:
            for vid, term in bindings.items():
                if isinstance(term, Var) and term.vid == vid:
                    continue
                m[vid] = term
        self._map = m

    def apply(self, t: Term) -> Term:
        """Homomorphic extension of the binding map to whole terms."""
        if not self._map:
            return t
        return _rebuild(t, self._map)

    def get(self, vid: int) -> Term | None:
        return self._map.get(vid)

    def domain(self) -> set[int]:
        return set(self._map)

    def items(self) -> Iterable[tuple[int, Term]]:
        return self._map.items()

    def is_idempotent(self) -> bool:
        return all(
            variables(t).isdisjoint(self._map) for t in self._map.values()
        )

    def __len__(self) -> int:
        return len(self._map)

    def __contains__(self, vid: int) -> bool:
        return vid in self._map

    def __getitem__(self, vid: int) -> Term:
        return self._map[vid]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Subst):
            return NotImplemented
        return self._map == other._map

    def __hash__(self) -> int:
        return hash(frozenset(self._map.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"x{v}->{t!r}" for v, t in sorted(self._map.items()))
        return "{" + inner + "}"


EMPTY_SUBST = Subst()


def _occurs(vid: int, t: Term, bindings: Mapping[int, Term]) -> bool:
    """Occurs check over a triangular binding map."""
    seen: set[int] = set()
    stack = [t]
    while stack:
        cur = stack.pop()
        while isinstance(cur, Var):
            if cur.vid == vid:
                return True
            if cur.vid in seen:
                break
            seen.add(cur.vid)
            nxt = bindings.get(cur.vid)
            if nxt is None:
                break
            cur = nxt
        if isinstance(cur, App):
            stack.extend(cur.args)
    return False


def unify(s: Term, t: Term) -> Subst:
    """Most general unifier of ``s`` and ``t``.

    Raises :class:`ClashError` on a root-symbol conflict and
    :class:`OccursCheckError` when a variable would contain itself.  The
    work list is explicit: deep left-hand sides must not exhaust the call
    stack.
    """
    bindings: dict[int, Term] = {}

    def walk(u: Term) -> Term:
        while isinstance(u, Var):
            nxt = bindings.get(u.vid)
            if nxt is None:
                return u
            u = nxt
        return u

    work: list[tuple[Term, Term]] = [(s, t)]
    while work:
        a, b = work.pop()
        a = walk(a)
        b = walk(b)
        if a is b:
            continue
        if isinstance(a, Var):
            if isinstance(b, Var):
                if a.vid != b.vid:
                    bindings[a.vid] = b
                continue
            if _occurs(a.vid, b, bindings):
                raise OccursCheckError(f"x{a.vid} occurs in {b!r}")
            bindings[a.vid] = b
            continue
        if isinstance(b, Var):
            if _occurs(b.vid, a, bindings):
                raise OccursCheckError(f"x{b.vid} occurs in {a!r}")
            bindings[b.vid] = a
            continue
        if a.sym != b.sym:
            raise ClashError(f"{a.sym!r} clashes with {b.sym!r}")
        work.extend(zip(a.args, b.args))

    return _solve(bindings)


def _solve(bindings: dict[int, Term]) -> Subst:
    """Resolve a triangular binding map into an idempotent substitution."""
    solved = dict(bindings)
    for _ in range(len(solved)):
        nxt = {vid: _rebuild(term, solved) for vid, term in solved.items()}
        if nxt == solved:
            break
        solved = nxt
    return Subst(solved)


def match(pattern: Term, subject: Term) -> Subst | None:
    """Matcher binding pattern variables so that the pattern becomes
    ``subject``, or ``None`` when no such substitution exists."""
    bound: dict[int, Term] = {}
    work: list[tuple[Term, Term]] = [(pattern, subject)]
    while work:
        p, s = work.pop()
        if isinstance(p, Var):
            prev = bound.get(p.vid)
            if prev is None:
                bound[p.vid] = s
            elif prev != s:
                return None
            continue
        if not isinstance(s, App) or p.sym != s.sym:
            return None
        work.extend(zip(p.args, s.args))
    return Subst(bound)


def variant(s: Term, t: Term) -> bool:
    """True iff ``s`` and ``t`` are equal up to bijective variable renaming."""
    return match(s, t) is not None and match(t, s) is not None


def _var_order(terms: Sequence[Term]) -> list[int]:
    """Variable identifiers in order of first preorder occurrence."""
    order: list[int] = []
    seen: set[int] = set()
    for t in terms:
        stack = [t]
        while stack:
            cur = stack.pop()
            if isinstance(cur, Var):
                if cur.vid not in seen:
                    seen.add(cur.vid)
                    order.append(cur.vid)
            else:
                for k in range(len(cur.args) - 1, -1, -1):
                    stack.append(cur.args[k])
    return order


def rename_apart_many(
    terms: Sequence[Term], avoid: Iterable[int]
) -> tuple[Term, ...]:
    """Rename the terms' variables, consistently across the sequence, so
    that the results share no variable with ``avoid``.

    Fresh identifiers are allocated monotonically above everything in
    sight, which keeps the renaming deterministic.
    """
    order = _var_order(terms)
    if not order:
        return tuple(terms)
    base = max(max(avoid, default=-1), max(order)) + 1
    mapping = {vid: Var(base + k) for k, vid in enumerate(order)}
    return tuple(_rebuild(t, mapping) for t in terms)


def rename_apart(t: Term, avoid: Iterable[int]) -> Term:
    """Variant of ``t`` whose variables are disjoint from ``avoid``."""
    return rename_apart_many((t,), avoid)[0]


def canonical_terms(terms: Sequence[Term]) -> tuple[Term, ...]:
    """Rename variables to 0,1,2,... in order of first occurrence.

    Canonical forms are equal exactly for variants, which makes them usable
    as dictionary keys for "modulo renaming" comparisons.
    """
    order = _var_order(terms)
    mapping = {vid: Var(k) for k, vid in enumerate(order)}
    return tuple(_rebuild(t, mapping) for t in terms)


def _flatten(t: Term) -> tuple:
    """Hashable preorder serialization (used for canonical keys)."""
    out: list = []
    stack = [t]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Var):
            out.append(("v", cur.vid, 0))
        else:
            out.append(("s", cur.sym.name, cur.sym.arity))
            for k in range(len(cur.args) - 1, -1, -1):
                stack.append(cur.args[k])
    return tuple(out)


def pair_key(lhs: Term, rhs: Term) -> tuple:
    """Hashable key identifying the ordered pair (lhs, rhs) up to renaming."""
    l, r = canonical_terms((lhs, rhs))
    return (_flatten(l), _flatten(r))


def unordered_pair_key(lhs: Term, rhs: Term) -> tuple:
    """Key identifying {lhs, rhs} up to renaming and side swapping."""
    return min(pair_key(lhs, rhs), pair_key(rhs, lhs))
