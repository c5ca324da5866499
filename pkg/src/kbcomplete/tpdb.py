"""Reader and writer for the classic `(VAR ...) (RULES ...)` problem format.

Both `l -> r` and `l == r` entries are accepted and ingested as equations;
completion input is equational either way.  Identifiers that are not
declared in the VAR section parse as constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from kbcomplete.terms import App, Symbol, Term, Var, variables


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


class ArityConflictError(ParseError):
    """The same identifier is used with two different arities."""


@dataclass(frozen=True)
class ProblemFile:
    """Declared variables plus the equations of one input problem."""

    variables: tuple[str, ...]
    equations: tuple[tuple[Term, Term], ...]
    symbols: tuple[Symbol, ...] = field(default=(), compare=False)

    def var_names(self) -> dict[int, str]:
        return dict(enumerate(self.variables))


@dataclass(frozen=True)
class _Token:
    kind: str  # lparen rparen comma arrow equals ident eof
    value: str
    line: int
    col: int


_PUNCT = {"(": "lparen", ")": "rparen", ",": "comma"}


def _tokenize(text: str) -> Iterator[_Token]:
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            col += 1
            i += 1
            continue
        if ch in _PUNCT:
            yield _Token(_PUNCT[ch], ch, line, col)
            col += 1
            i += 1
            continue
        if ch == "-" and i + 1 < n and text[i + 1] == ">":
            yield _Token("arrow", "->", line, col)
            col += 2
            i += 2
            continue
        if ch == "=":
            if i + 1 < n and text[i + 1] == "=":
                yield _Token("equals", "==", line, col)
                col += 2
                i += 2
                continue
            raise ParseError("stray '='", line, col)
        start, start_col = i, col
        while i < n:
            ch = text[i]
            if ch.isspace() or ch in _PUNCT:
                break
            if ch == "-" and i + 1 < n and text[i + 1] == ">":
                break
            if ch == "=" and i + 1 < n and text[i + 1] == "=":
                break
            i += 1
            col += 1
        yield _Token("ident", text[start:i], line, start_col)
    yield _Token("eof", "", line, col)


class _Parser:
    def __init__(self, text: str):
        self._tokens = list(_tokenize(text))
        self._pos = 0
        self.var_ids: dict[str, int] = {}
        self.arities: dict[str, int] = {}
        self.symbol_order: list[str] = []

    def _peek(self) -> _Token:
        return self._tokens[self._pos]

    def _next(self) -> _Token:
        tok = self._tokens[self._pos]
        if tok.kind != "eof":
            self._pos += 1
        return tok

    def _expect(self, kind: str) -> _Token:
        tok = self._next()
        if tok.kind != kind:
            raise ParseError(
                f"expected {kind}, found {tok.value or 'end of input'!r}",
                tok.line,
                tok.col,
            )
        return tok

    def parse(self) -> ProblemFile:
        seen_var = seen_rules = False
        equations: list[tuple[Term, Term]] = []
        while self._peek().kind == "lparen":
            self._next()
            name_tok = self._expect("ident")
            section = name_tok.value
            if section == "VAR":
                if seen_var:
                    raise ParseError(
                        "duplicate VAR section", name_tok.line, name_tok.col
                    )
                seen_var = True
                self._parse_var_section()
            elif section == "RULES":
                if seen_rules:
                    raise ParseError(
                        "duplicate RULES section", name_tok.line, name_tok.col
                    )
                seen_rules = True
                equations = self._parse_rules_section()
            elif section == "COMMENT":
                self._skip_balanced()
            else:
                raise ParseError(
                    f"unknown section {section!r}", name_tok.line, name_tok.col
                )
        tok = self._peek()
        if tok.kind != "eof":
            raise ParseError(
                f"unexpected {tok.value!r} after sections", tok.line, tok.col
            )
        if not seen_rules:
            raise ParseError("missing RULES section", tok.line, tok.col)
        symbols = tuple(
            Symbol(name, self.arities[name]) for name in self.symbol_order
        )
        return ProblemFile(
            variables=tuple(self.var_ids),
            equations=tuple(equations),
            symbols=symbols,
        )

    def _parse_var_section(self) -> None:
        while True:
            tok = self._next()
            if tok.kind == "rparen":
                return
            if tok.kind != "ident":
                raise ParseError(
                    f"expected variable name, found {tok.value!r}",
                    tok.line,
                    tok.col,
                )
            if tok.value in self.var_ids:
                raise ParseError(
                    f"variable {tok.value!r} declared twice", tok.line, tok.col
                )
            self.var_ids[tok.value] = len(self.var_ids)

    def _parse_rules_section(self) -> list[tuple[Term, Term]]:
        out: list[tuple[Term, Term]] = []
        while True:
            if self._peek().kind == "rparen":
                self._next()
                return out
            lhs = self._parse_term()
            sep = self._next()
            if sep.kind not in ("arrow", "equals"):
                raise ParseError(
                    f"expected '->' or '==', found {sep.value!r}",
                    sep.line,
                    sep.col,
                )
            rhs = self._parse_term()
            out.append((lhs, rhs))

    def _parse_term(self) -> Term:
        tok = self._expect("ident")
        name = tok.value
        if self._peek().kind == "lparen":
            if name in self.var_ids:
                raise ParseError(
                    f"variable {name!r} used as a function", tok.line, tok.col
                )
            self._next()
            args: list[Term] = []
            if self._peek().kind != "rparen":
                args.append(self._parse_term())
                while self._peek().kind == "comma":
                    self._next()
                    args.append(self._parse_term())
            self._expect("rparen")
            return App(self._symbol(name, len(args), tok), tuple(args))
        if name in self.var_ids:
            return Var(self.var_ids[name])
        return App(self._symbol(name, 0, tok))

    def _symbol(self, name: str, arity: int, tok: _Token) -> Symbol:
        known = self.arities.get(name)
        if known is None:
            self.arities[name] = arity
            self.symbol_order.append(name)
        elif known != arity:
            raise ArityConflictError(
                f"symbol {name!r} used with arity {arity} and {known}",
                tok.line,
                tok.col,
            )
        return Symbol(name, arity)

    def _skip_balanced(self) -> None:
        depth = 1
        while depth:
            tok = self._next()
            if tok.kind == "eof":
                raise ParseError("unterminated section", tok.line, tok.col)
            if tok.kind == "lparen":
                depth += 1
            elif tok.kind == "rparen":
                depth -= 1


def parse_problem(text: str) -> ProblemFile:
    """Parse a problem file; raises :class:`ParseError` with line/column."""
    return _Parser(text).parse()


_NAME_POOL = ("x", "y", "z", "u", "v", "w")


def name_variables(
    terms: Sequence[Term],
    known: Mapping[int, str] | None = None,
    reserved: set[str] | None = None,
) -> dict[int, str]:
    """Assign display names to every variable in ``terms``.

    Known names win; fresh variables draw from a conventional pool,
    avoiding both known names and ``reserved`` (typically symbol names).
    """
    known = dict(known or {})
    taken = set(known.values()) | (reserved or set())
    out: dict[int, str] = {}
    fresh = 0
    for t in terms:
        for vid in sorted(variables(t)):
            if vid in out:
                continue
            name = known.get(vid)
            while name is None or name in taken and vid not in known:
                base = _NAME_POOL[fresh % len(_NAME_POOL)]
                suffix = fresh // len(_NAME_POOL)
                name = base + (str(suffix) if suffix else "")
                fresh += 1
                if name in taken:
                    name = None
            taken.add(name)
            out[vid] = name
    return out


def format_term(t: Term, names: Mapping[int, str]) -> str:
    if isinstance(t, Var):
        return names.get(t.vid, f"x{t.vid}")
    if not t.args:
        return t.sym.name
    inner = ",".join(format_term(arg, names) for arg in t.args)
    return f"{t.sym.name}({inner})"


def format_trs(
    rules: Sequence[tuple[Term, Term]],
    var_names: Mapping[int, str] | None = None,
    arrow: str = "->",
) -> str:
    """Render ordered pairs as a `(VAR ...) (RULES ...)` document."""
    terms = [t for pair in rules for t in pair]
    reserved = {s.name for t in terms for s in _term_symbols(t)}
    names = name_variables(terms, var_names, reserved)
    used = sorted(
        {vid for t in terms for vid in variables(t)},
        key=lambda v: names[v],
    )
    lines = []
    lines.append("(VAR " + " ".join(names[v] for v in used) + ")")
    lines.append("(RULES")
    for lhs, rhs in rules:
        lines.append(
            f"  {format_term(lhs, names)} {arrow} {format_term(rhs, names)}"
        )
    lines.append(")")
    return "\n".join(lines) + "\n"


def _term_symbols(t: Term):
    stack = [t]
    while stack:
        cur = stack.pop()
        if isinstance(cur, App):
            yield cur.sym
            stack.extend(cur.args)


def format_problem(pf: ProblemFile) -> str:
    """Inverse of :func:`parse_problem` up to whitespace."""
    names = pf.var_names()
    lines = []
    lines.append("(VAR " + " ".join(pf.variables) + ")")
    lines.append("(RULES")
    for lhs, rhs in pf.equations:
        lines.append(f"  {format_term(lhs, names)} -> {format_term(rhs, names)}")
    lines.append(")")
    return "\n".join(lines) + "\n"
