"""Replayable proof traces.

A trace lists the signature, the order information, the initial equations,
every inference step with its witnesses, and the final rule set.  The
replayer below reconstructs the final state from the initial one while
checking each step's side condition, using only the term-level operations;
it shares nothing with the completion loop itself.

The serialized form is a plain XML document, sufficient for an external
replayer to do the same.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Mapping

from kbcomplete import completion as _c
from kbcomplete.orders import KboWeights, Precedence, kbo_gt, lpo_gt
from kbcomplete.terms import (
    App,
    Position,
    Symbol,
    Term,
    UnificationError,
    Var,
    match,
    positions,
    rename_apart_many,
    replace_at,
    subterm_at,
    unify,
    variables,
    variant,
)


class ReplayError(Exception):
    """A recorded step failed validation during replay."""


# ---------------------------------------------------------------------------
# Trace records (witnesses only; substitutions are recomputed on replay)


@dataclass(frozen=True)
class TraceRewrite:
    rule: int
    position: Position


@dataclass(frozen=True)
class TraceSimplify:
    equation: int
    new_equation: int
    lhs_steps: tuple[TraceRewrite, ...]
    rhs_steps: tuple[TraceRewrite, ...]
    new_lhs: Term
    new_rhs: Term


@dataclass(frozen=True)
class TraceDelete:
    equation: int


@dataclass(frozen=True)
class TraceOrient:
    equation: int
    rule: int
    direction: str
    lhs: Term
    rhs: Term
    committed: tuple[tuple[str, str], ...]
    witness: str


@dataclass(frozen=True)
class TraceCompose:
    rule: int
    new_rule: int
    steps: tuple[TraceRewrite, ...]
    new_rhs: Term


@dataclass(frozen=True)
class TraceCollapse:
    rule: int
    collapser: int
    position: Position
    equation: int
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class TraceDeduce:
    inner: int
    outer: int
    position: Position
    equation: int
    lhs: Term
    rhs: Term


TraceStep = (
    TraceSimplify
    | TraceDelete
    | TraceOrient
    | TraceCompose
    | TraceCollapse
    | TraceDeduce
)


@dataclass(frozen=True)
class OrderInfo:
    kind: str  # "lpo" | "kbo" | "external"
    precedence: tuple[tuple[str, str], ...] = ()
    w0: int = 1
    weights: tuple[tuple[str, int], ...] = ()
    command: str | None = None


@dataclass(frozen=True)
class ProofTrace:
    symbols: tuple[Symbol, ...]
    order: OrderInfo
    initial: tuple[tuple[int, Term, Term], ...]
    steps: tuple[TraceStep, ...]
    final: tuple[tuple[int, Term, Term], ...]


def _trw(steps) -> tuple[TraceRewrite, ...]:
    return tuple(TraceRewrite(s.rule_index, s.position) for s in steps)


def build_trace(state: "_c.CompletionState") -> ProofTrace:
    """Snapshot a completion state's log as a replayable trace."""
    if state.order is not None:
        pairs = tuple(
            sorted(
                (a.name, b.name) for a, b in state.order.prec.pairs()
            )
        )
        weights = ()
        if state.order.kind == "kbo":
            weights = tuple(
                sorted(
                    (sym.name, state.order.weights.weight_of(sym))
                    for sym in state.symbol_order
                )
            )
        order = OrderInfo(
            kind=state.order.kind,
            precedence=pairs,
            w0=state.order.weights.w0,
            weights=weights,
        )
    else:
        order = OrderInfo(
            kind="external", command=state.config.backend.command
        )
    steps: list[TraceStep] = []
    for step in state.log:
        if isinstance(step, _c.SimplifyStep):
            steps.append(
                TraceSimplify(
                    step.equation,
                    step.new_equation,
                    _trw(step.lhs_steps),
                    _trw(step.rhs_steps),
                    step.new_lhs,
                    step.new_rhs,
                )
            )
        elif isinstance(step, _c.DeleteStep):
            steps.append(TraceDelete(step.equation))
        elif isinstance(step, _c.OrientStep):
            steps.append(
                TraceOrient(
                    step.equation,
                    step.rule,
                    step.direction,
                    step.lhs,
                    step.rhs,
                    tuple((a.name, b.name) for a, b in step.committed),
                    step.witness,
                )
            )
        elif isinstance(step, _c.ComposeStep):
            steps.append(
                TraceCompose(
                    step.rule, step.new_rule, _trw(step.steps), step.new_rhs
                )
            )
        elif isinstance(step, _c.CollapseStep):
            steps.append(
                TraceCollapse(
                    step.rule,
                    step.collapser,
                    step.position,
                    step.equation,
                    step.lhs,
                    step.rhs,
                )
            )
        elif isinstance(step, _c.DeduceStep):
            steps.append(
                TraceDeduce(
                    step.inner,
                    step.outer,
                    step.position,
                    step.equation,
                    step.lhs,
                    step.rhs,
                )
            )
        else:  # pragma: no cover - exhaustive over the log union
            raise TypeError(f"unknown log entry {step!r}")
    return ProofTrace(
        symbols=tuple(state.symbol_order),
        order=order,
        initial=tuple((e.index, e.lhs, e.rhs) for e in state.initial),
        steps=tuple(steps),
        final=tuple((r.index, r.lhs, r.rhs) for r in state.rules),
    )


# ---------------------------------------------------------------------------
# Replay with validation


class _Replayer:
    def __init__(self, trace: ProofTrace):
        self.trace = trace
        self.eqs: dict[int, tuple[Term, Term]] = {
            idx: (l, r) for idx, l, r in trace.initial
        }
        self.rules: dict[int, tuple[Term, Term]] = {}
        self.used: set[int] = set(self.eqs)
        self.symbols = {sym.name: sym for sym in trace.symbols}
        self.order = trace.order
        self._prec: Precedence | None = None
        self._weights: KboWeights | None = None
        if trace.order.kind in ("lpo", "kbo"):
            try:
                self._prec = Precedence(
                    (self.symbols[a], self.symbols[b])
                    for a, b in trace.order.precedence
                )
            except (KeyError, ValueError) as err:
                raise ReplayError(f"bad precedence in trace: {err}") from err
            if trace.order.kind == "kbo":
                self._weights = KboWeights(
                    w0=trace.order.w0,
                    weights={
                        self.symbols[name]: w
                        for name, w in trace.order.weights
                    },
                )

    def _fail(self, step, why: str):
        raise ReplayError(f"{type(step).__name__}: {why}")

    def _fresh(self, step, index: int) -> int:
        if index in self.used:
            self._fail(step, f"index {index} reused")
        self.used.add(index)
        return index

    def _chain(self, step, start: Term, rewrites) -> Term:
        cur = start
        for rw in rewrites:
            pair = self.rules.get(rw.rule)
            if pair is None:
                self._fail(step, f"rewrite cites dead rule {rw.rule}")
            lhs, rhs = pair
            try:
                sub = subterm_at(cur, rw.position)
            except Exception:
                self._fail(step, f"position {rw.position} invalid")
            sigma = match(lhs, sub)
            if sigma is None:
                self._fail(step, f"rule {rw.rule} does not match")
            cur = replace_at(cur, rw.position, sigma.apply(rhs))
        return cur

    def _ordered(self, step, lhs: Term, rhs: Term) -> bool:
        if self.order.kind == "lpo":
            return lpo_gt(self._prec, lhs, rhs)
        if self.order.kind == "kbo":
            return kbo_gt(self._weights, self._prec, lhs, rhs)
        return True  # external verdicts are witnesses, not recomputable

    def run(self) -> dict[int, tuple[Term, Term]]:
        for step in self.trace.steps:
            self._apply(step)
        final = {idx: (l, r) for idx, l, r in self.trace.final}
        if self.eqs:
            raise ReplayError(f"equations left over: {sorted(self.eqs)}")
        if self.rules != final:
            raise ReplayError("replayed rules differ from recorded final set")
        return self.rules

    def _apply(self, step: TraceStep) -> None:
        if isinstance(step, TraceSimplify):
            if step.equation not in self.eqs:
                self._fail(step, f"no equation {step.equation}")
            lhs, rhs = self.eqs[step.equation]
            if not step.lhs_steps and not step.rhs_steps:
                self._fail(step, "records no rewrites")
            new_lhs = self._chain(step, lhs, step.lhs_steps)
            new_rhs = self._chain(step, rhs, step.rhs_steps)
            if new_lhs != step.new_lhs or new_rhs != step.new_rhs:
                self._fail(step, "rewritten sides differ from recorded")
            del self.eqs[step.equation]
            self.eqs[self._fresh(step, step.new_equation)] = (
                new_lhs,
                new_rhs,
            )
        elif isinstance(step, TraceDelete):
            pair = self.eqs.get(step.equation)
            if pair is None:
                self._fail(step, f"no equation {step.equation}")
            if pair[0] != pair[1]:
                self._fail(step, "sides are not syntactically equal")
            del self.eqs[step.equation]
        elif isinstance(step, TraceOrient):
            pair = self.eqs.get(step.equation)
            if pair is None:
                self._fail(step, f"no equation {step.equation}")
            s, t = pair
            expect = (s, t) if step.direction == "lr" else (t, s)
            if (step.lhs, step.rhs) != expect:
                self._fail(step, "recorded sides differ from equation")
            if isinstance(step.lhs, Var):
                self._fail(step, "variable left-hand side")
            if not variables(step.rhs) <= variables(step.lhs):
                self._fail(step, "right side adds variables")
            if not self._ordered(step, step.lhs, step.rhs):
                self._fail(step, "rule not oriented by the recorded order")
            del self.eqs[step.equation]
            self.rules[self._fresh(step, step.rule)] = (step.lhs, step.rhs)
        elif isinstance(step, TraceCompose):
            pair = self.rules.get(step.rule)
            if pair is None:
                self._fail(step, f"no rule {step.rule}")
            lhs, rhs = pair
            if not step.steps:
                self._fail(step, "records no rewrites")
            new_rhs = self._chain(step, rhs, step.steps)
            if new_rhs != step.new_rhs:
                self._fail(step, "rewritten side differs from recorded")
            del self.rules[step.rule]
            self.rules[self._fresh(step, step.new_rule)] = (lhs, new_rhs)
        elif isinstance(step, TraceCollapse):
            pair = self.rules.get(step.rule)
            if pair is None:
                self._fail(step, f"no rule {step.rule}")
            lhs, rhs = pair
            coll = self.rules.get(step.collapser)
            if coll is None:
                self._fail(step, f"no collapser {step.collapser}")
            reduct = self._chain(
                step, lhs, (TraceRewrite(step.collapser, step.position),)
            )
            if not _strict_encompassment(lhs, coll[0]):
                self._fail(step, "collapse side condition violated")
            if reduct != step.lhs or rhs != step.rhs:
                self._fail(step, "recorded equation differs")
            del self.rules[step.rule]
            self.eqs[self._fresh(step, step.equation)] = (reduct, rhs)
        elif isinstance(step, TraceDeduce):
            inner = self.rules.get(step.inner)
            outer = self.rules.get(step.outer)
            if inner is None or outer is None:
                self._fail(step, "overlapping rules not live")
            if step.inner == step.outer and not step.position:
                self._fail(step, "root overlap of a rule with itself")
            avoid = variables(outer[0]) | variables(outer[1])
            lhs_i, rhs_i = rename_apart_many(inner, avoid)
            try:
                sub = subterm_at(outer[0], step.position)
            except Exception:
                self._fail(step, "overlap position invalid")
            if isinstance(sub, Var):
                self._fail(step, "overlap at a variable position")
            try:
                sigma = unify(lhs_i, sub)
            except UnificationError:
                self._fail(step, "rules do not overlap at the position")
            left = sigma.apply(replace_at(outer[0], step.position, rhs_i))
            right = sigma.apply(outer[1])
            if left != step.lhs or right != step.rhs:
                self._fail(step, "critical pair differs from recorded")
            self.eqs[self._fresh(step, step.equation)] = (left, right)
        else:  # pragma: no cover
            self._fail(step, "unknown step kind")


def _strict_encompassment(s: Term, l: Term) -> bool:
    if variant(s, l):
        return False
    return any(
        not isinstance(sub, Var) and match(l, sub) is not None
        for _, sub in positions(s)
    )


def replay(trace: ProofTrace) -> dict[int, tuple[Term, Term]]:
    """Replay a trace from its initial equations, validating every step,
    and return the reconstructed final rule map."""
    return _Replayer(trace).run()


# ---------------------------------------------------------------------------
# XML serialization


def _pos_str(pos: Position) -> str:
    return ".".join(str(p) for p in pos)


def _pos_parse(text: str) -> Position:
    if not text:
        return ()
    return tuple(int(p) for p in text.split("."))


def _term_xml(t: Term, parent: ET.Element) -> None:
    stack: list[tuple[Term, ET.Element]] = [(t, parent)]
    while stack:
        cur, into = stack.pop()
        if isinstance(cur, Var):
            ET.SubElement(into, "var", id=str(cur.vid))
        else:
            el = ET.SubElement(into, "app", symbol=cur.sym.name)
            for arg in reversed(cur.args):
                stack.append((arg, el))


def _term_from_xml(el: ET.Element, symbols: Mapping[str, Symbol]) -> Term:
    if el.tag == "var":
        return Var(int(el.attrib["id"]))
    if el.tag != "app":
        raise ReplayError(f"unexpected element {el.tag!r} in term")
    name = el.attrib["symbol"]
    args = tuple(_term_from_xml(child, symbols) for child in el)
    sym = symbols.get(name)
    if sym is None or sym.arity != len(args):
        raise ReplayError(f"symbol {name!r}/{len(args)} not in signature")
    return App(sym, args)


def _sides_xml(parent: ET.Element, lhs: Term, rhs: Term) -> None:
    le = ET.SubElement(parent, "lhs")
    _term_xml(lhs, le)
    re = ET.SubElement(parent, "rhs")
    _term_xml(rhs, re)


def _sides_from_xml(el: ET.Element, symbols) -> tuple[Term, Term]:
    lhs_el = el.find("lhs")
    rhs_el = el.find("rhs")
    if lhs_el is None or rhs_el is None or len(lhs_el) != 1 or len(rhs_el) != 1:
        raise ReplayError("malformed sides")
    return (
        _term_from_xml(lhs_el[0], symbols),
        _term_from_xml(rhs_el[0], symbols),
    )


def _rewrites_xml(parent: ET.Element, tag: str, rewrites) -> None:
    wrap = ET.SubElement(parent, tag)
    for rw in rewrites:
        ET.SubElement(
            wrap, "rw", rule=str(rw.rule), position=_pos_str(rw.position)
        )


def _rewrites_from_xml(el: ET.Element | None) -> tuple[TraceRewrite, ...]:
    if el is None:
        return ()
    return tuple(
        TraceRewrite(int(rw.attrib["rule"]), _pos_parse(rw.attrib["position"]))
        for rw in el.findall("rw")
    )


def to_xml(trace: ProofTrace) -> str:
    root = ET.Element("prooftrace")
    sig = ET.SubElement(root, "signature")
    for sym in trace.symbols:
        ET.SubElement(sig, "symbol", name=sym.name, arity=str(sym.arity))
    order = ET.SubElement(root, "order", kind=trace.order.kind)
    if trace.order.kind == "external":
        order.set("command", trace.order.command or "")
    else:
        for a, b in trace.order.precedence:
            ET.SubElement(order, "gt", left=a, right=b)
        if trace.order.kind == "kbo":
            weights = ET.SubElement(order, "weights", w0=str(trace.order.w0))
            for name, w in trace.order.weights:
                ET.SubElement(weights, "weight", symbol=name, value=str(w))
    initial = ET.SubElement(root, "initial")
    for idx, lhs, rhs in trace.initial:
        eq = ET.SubElement(initial, "equation", index=str(idx))
        _sides_xml(eq, lhs, rhs)
    steps = ET.SubElement(root, "steps")
    for step in trace.steps:
        if isinstance(step, TraceSimplify):
            el = ET.SubElement(
                steps,
                "simplify",
                equation=str(step.equation),
                result=str(step.new_equation),
            )
            _rewrites_xml(el, "lhs-steps", step.lhs_steps)
            _rewrites_xml(el, "rhs-steps", step.rhs_steps)
            _sides_xml(el, step.new_lhs, step.new_rhs)
        elif isinstance(step, TraceDelete):
            ET.SubElement(steps, "delete", equation=str(step.equation))
        elif isinstance(step, TraceOrient):
            el = ET.SubElement(
                steps,
                "orient",
                equation=str(step.equation),
                rule=str(step.rule),
                direction=step.direction,
                witness=step.witness,
            )
            committed = ET.SubElement(el, "committed")
            for a, b in step.committed:
                ET.SubElement(committed, "gt", left=a, right=b)
            _sides_xml(el, step.lhs, step.rhs)
        elif isinstance(step, TraceCompose):
            el = ET.SubElement(
                steps,
                "compose",
                rule=str(step.rule),
                result=str(step.new_rule),
            )
            _rewrites_xml(el, "steps", step.steps)
            rhs = ET.SubElement(el, "rhs")
            _term_xml(step.new_rhs, rhs)
        elif isinstance(step, TraceCollapse):
            el = ET.SubElement(
                steps,
                "collapse",
                rule=str(step.rule),
                collapser=str(step.collapser),
                position=_pos_str(step.position),
                equation=str(step.equation),
            )
            _sides_xml(el, step.lhs, step.rhs)
        elif isinstance(step, TraceDeduce):
            el = ET.SubElement(
                steps,
                "deduce",
                inner=str(step.inner),
                outer=str(step.outer),
                position=_pos_str(step.position),
                equation=str(step.equation),
            )
            _sides_xml(el, step.lhs, step.rhs)
    final = ET.SubElement(root, "final")
    for idx, lhs, rhs in trace.final:
        rule = ET.SubElement(final, "rule", index=str(idx))
        _sides_xml(rule, lhs, rhs)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def from_xml(text: str) -> ProofTrace:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as err:
        raise ReplayError(f"malformed trace document: {err}") from err
    if root.tag != "prooftrace":
        raise ReplayError("not a proof trace document")
    symbols = tuple(
        Symbol(el.attrib["name"], int(el.attrib["arity"]))
        for el in root.find("signature") or ()
    )
    by_name = {sym.name: sym for sym in symbols}
    order_el = root.find("order")
    if order_el is None:
        raise ReplayError("missing order element")
    kind = order_el.attrib["kind"]
    if kind == "external":
        order = OrderInfo(kind=kind, command=order_el.attrib.get("command"))
    else:
        prec = tuple(
            (el.attrib["left"], el.attrib["right"])
            for el in order_el.findall("gt")
        )
        w0, weights = 1, ()
        weights_el = order_el.find("weights")
        if weights_el is not None:
            w0 = int(weights_el.attrib["w0"])
            weights = tuple(
                (el.attrib["symbol"], int(el.attrib["value"]))
                for el in weights_el.findall("weight")
            )
        order = OrderInfo(kind=kind, precedence=prec, w0=w0, weights=weights)
    initial = tuple(
        (int(el.attrib["index"]),) + _sides_from_xml(el, by_name)
        for el in root.find("initial") or ()
    )
    steps: list[TraceStep] = []
    for el in root.find("steps") or ():
        if el.tag == "simplify":
            lhs, rhs = _sides_from_xml(el, by_name)
            steps.append(
                TraceSimplify(
                    int(el.attrib["equation"]),
                    int(el.attrib["result"]),
                    _rewrites_from_xml(el.find("lhs-steps")),
                    _rewrites_from_xml(el.find("rhs-steps")),
                    lhs,
                    rhs,
                )
            )
        elif el.tag == "delete":
            steps.append(TraceDelete(int(el.attrib["equation"])))
        elif el.tag == "orient":
            lhs, rhs = _sides_from_xml(el, by_name)
            committed_el = el.find("committed")
            committed = tuple(
                (gt.attrib["left"], gt.attrib["right"])
                for gt in (committed_el if committed_el is not None else ())
            )
            steps.append(
                TraceOrient(
                    int(el.attrib["equation"]),
                    int(el.attrib["rule"]),
                    el.attrib["direction"],
                    lhs,
                    rhs,
                    committed,
                    el.attrib["witness"],
                )
            )
        elif el.tag == "compose":
            rhs_el = el.find("rhs")
            if rhs_el is None or len(rhs_el) != 1:
                raise ReplayError("malformed compose step")
            steps.append(
                TraceCompose(
                    int(el.attrib["rule"]),
                    int(el.attrib["result"]),
                    _rewrites_from_xml(el.find("steps")),
                    _term_from_xml(rhs_el[0], by_name),
                )
            )
        elif el.tag == "collapse":
            lhs, rhs = _sides_from_xml(el, by_name)
            steps.append(
                TraceCollapse(
                    int(el.attrib["rule"]),
                    int(el.attrib["collapser"]),
                    _pos_parse(el.attrib["position"]),
                    int(el.attrib["equation"]),
                    lhs,
                    rhs,
                )
            )
        elif el.tag == "deduce":
            lhs, rhs = _sides_from_xml(el, by_name)
            steps.append(
                TraceDeduce(
                    int(el.attrib["inner"]),
                    int(el.attrib["outer"]),
                    _pos_parse(el.attrib["position"]),
                    int(el.attrib["equation"]),
                    lhs,
                    rhs,
                )
            )
        else:
            raise ReplayError(f"unknown step element {el.tag!r}")
    final = tuple(
        (int(el.attrib["index"]),) + _sides_from_xml(el, by_name)
        for el in root.find("final") or ()
    )
    return ProofTrace(
        symbols=symbols,
        order=order,
        initial=initial,
        steps=tuple(steps),
        final=final,
    )
