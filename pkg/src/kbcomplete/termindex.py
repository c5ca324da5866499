"""Discrimination-tree index over stored terms.

Stored terms are linearized in preorder with every variable abstracted to a
single wildcard, so retrieval returns a superset of the true matching or
unifiable entries ("candidate sets").  Callers post-filter candidates with
real match/unify when exactness is needed; the filter is what keeps the
non-perfect abstraction sound.

Reads may run concurrently; insert/remove require exclusive access.
"""

from __future__ import annotations

from typing import Union

from kbcomplete.terms import Symbol, Term, Var

#: Wildcard standing for any variable in a stored path.
STAR = "*"

PathSym = Union[Symbol, str]
PathString = tuple[PathSym, ...]


class DuplicateEntryError(Exception):
    """The entry identifier is already stored."""


class UnknownEntryError(Exception):
    """The entry identifier is not stored (or not under the given term)."""


def linearize(t: Term) -> PathString:
    """Preorder path string of ``t`` with variables abstracted to ``STAR``."""
    out: list[PathSym] = []
    stack = [t]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Var):
            out.append(STAR)
        else:
            out.append(cur.sym)
            for k in range(len(cur.args) - 1, -1, -1):
                stack.append(cur.args[k])
    return tuple(out)


def _query_tokens(t: Term) -> tuple[list[PathSym], list[int]]:
    """Preorder tokens of a query term plus a jump table.

    ``jump[i]`` is the token index just past the subterm that starts at
    ``i``; it lets a wildcard consume a whole subterm without re-parsing.
    """
    tokens: list[PathSym] = []
    jump: list[int] = []
    starts: list[int] = []
    stack: list[tuple[Term, bool]] = [(t, False)]
    while stack:
        node, done = stack.pop()
        if done:
            jump[starts.pop()] = len(tokens)
            continue
        starts.append(len(tokens))
        stack.append((node, True))
        if isinstance(node, Var):
            tokens.append(STAR)
            jump.append(-1)
        else:
            tokens.append(node.sym)
            jump.append(-1)
            for k in range(len(node.args) - 1, -1, -1):
                stack.append((node.args[k], False))
    return tokens, jump


class _Node:
    __slots__ = ("children", "entries")

    def __init__(self) -> None:
        self.children: dict[PathSym, _Node] = {}
        self.entries: set[int] = set()


class DiscriminationTree:
    """Trie over linearized terms mapping path strings to entry id sets."""

    __slots__ = ("_root", "_paths")

    def __init__(self) -> None:
        self._root = _Node()
        self._paths: dict[int, PathString] = {}

    def __len__(self) -> int:
        return len(self._paths)

    def __contains__(self, entry_id: int) -> bool:
        return entry_id in self._paths

    def stored_path(self, entry_id: int) -> PathString:
        return self._paths[entry_id]

    def insert(self, entry_id: int, t: Term) -> None:
        if entry_id in self._paths:
            raise DuplicateEntryError(f"entry {entry_id} already stored")
        path = linearize(t)
        node = self._root
        for sym in path:
            nxt = node.children.get(sym)
            if nxt is None:
                nxt = _Node()
                node.children[sym] = nxt
            node = nxt
        node.entries.add(entry_id)
        self._paths[entry_id] = path

    def remove(self, entry_id: int, t: Term) -> None:
        path = self._paths.get(entry_id)
        if path is None or path != linearize(t):
            raise UnknownEntryError(f"entry {entry_id} not stored under {t!r}")
        spine: list[tuple[_Node, PathSym]] = []
        node = self._root
        for sym in path:
            spine.append((node, sym))
            node = node.children[sym]
        node.entries.discard(entry_id)
        del self._paths[entry_id]
        # prune now-empty branches so removal restores the previous shape
        for parent, sym in reversed(spine):
            child = parent.children[sym]
            if child.entries or child.children:
                break
            del parent.children[sym]

    def candidates_matching(
        self, subject: Term, visited: list | None = None
    ) -> set[int]:
        """Ids whose stored term may generalize ``subject``.

        Guaranteed superset of {id | match(stored(id), subject) succeeds}:
        a stored wildcard skips the corresponding subject subterm, stored
        symbols must agree with subject symbols.
        """
        tokens, jump = _query_tokens(subject)
        end = len(tokens)
        found: set[int] = set()
        stack: list[tuple[_Node, int]] = [(self._root, 0)]
        while stack:
            node, i = stack.pop()
            if visited is not None:
                visited.append(node)
            if i == end:
                found |= node.entries
                continue
            star = node.children.get(STAR)
            if star is not None:
                stack.append((star, jump[i]))
            tok = tokens[i]
            if tok is not STAR:
                child = node.children.get(tok)
                if child is not None:
                    stack.append((child, i + 1))
        return found

    def candidates_unifiable(
        self, query: Term, visited: list | None = None
    ) -> set[int]:
        """Ids whose stored term may unify with ``query``.

        Superset of the truly unifiable entries: wildcards on either side
        skip the other side's subterm, so only symbol clashes prune.
        """
        tokens, jump = _query_tokens(query)
        end = len(tokens)
        found: set[int] = set()
        skip_memo: dict[int, list[_Node]] = {}
        stack: list[tuple[_Node, int]] = [(self._root, 0)]
        while stack:
            node, i = stack.pop()
            if visited is not None:
                visited.append(node)
            if i == end:
                found |= node.entries
                continue
            tok = tokens[i]
            if tok is STAR:
                for nxt in self._skip_one_term(node, skip_memo, visited):
                    stack.append((nxt, i + 1))
                continue
            star = node.children.get(STAR)
            if star is not None:
                stack.append((star, jump[i]))
            child = node.children.get(tok)
            if child is not None:
                stack.append((child, i + 1))
        return found

    @staticmethod
    def _skip_one_term(
        node: _Node,
        memo: dict[int, list[_Node]],
        visited: list | None,
    ) -> list[_Node]:
        """All nodes reachable from ``node`` by consuming one whole term."""
        cached = memo.get(id(node))
        if cached is not None:
            return cached
        out: list[_Node] = []
        stack: list[tuple[_Node, int]] = [(node, 1)]
        while stack:
            cur, need = stack.pop()
            for sym, child in cur.children.items():
                if visited is not None:
                    visited.append(child)
                remaining = need - 1 + (0 if sym is STAR else sym.arity)
                if remaining == 0:
                    out.append(child)
                else:
                    stack.append((child, remaining))
        memo[id(node)] = out
        return out

    def total_path_length(self) -> int:
        """Sum of stored path lengths (retrieval work upper bound)."""
        return sum(len(p) for p in self._paths.values())
