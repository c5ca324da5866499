"""The automatic completion loop and its six inference rules.

One iteration runs Simplify, Delete, the success check, Orient on a single
chosen equation, Compose, Collapse and Deduce, then repeats.  Within the
four bulk phases every unit task (per equation, per rule, or per rule
pair) is a pure function over a frozen snapshot of the current state, so
tasks may run on a worker pool; results are merged in task-ordinal order,
which makes parallel runs bit-identical to sequential ones.

Three independent performance layers can be disabled: the result caches
(one per bulk phase plus one for processed overlaps), discrimination-tree
indexing of rule left-hand sides, and the worker pool itself.  None of
them may change results, only speed.
"""

from __future__ import annotations

import heapq
import os
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeoutError
from dataclasses import dataclass, field
from typing import Literal, Sequence

from kbcomplete.orders import (
    InadmissibleWeightsError,
    OrderState,
    external_terminates,
)
from kbcomplete.terms import (
    Position,
    Subst,
    Symbol,
    Term,
    UnificationError,
    Var,
    match,
    positions,
    rename_apart_many,
    replace_at,
    symbols_of,
    unify,
    unordered_pair_key,
    variables,
)
from kbcomplete.trs import (
    BudgetExceeded,
    Deadline,
    EquationSet,
    IndexAllocator,
    RewriteStep,
    RuleSet,
    _postorder,
    encompassment_strict,
    normalize,
    rewrite_once,
)

WORKERS_ENV_VAR = "KBCOMPLETE_WORKERS"


class SoundnessError(Exception):
    """The run produced evidence of a non-terminating rule set (possible
    only with an unsound external termination verdict)."""


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class Backend:
    """Which reduction order drives Orient: an internal order constructed
    on the fly, or an external yes/no tool run per candidate rule set."""

    kind: Literal["lpo", "kbo", "external"] = "lpo"
    command: str | None = None

    def __post_init__(self) -> None:
        if self.kind == "external" and not self.command:
            raise ValueError("external backend needs a command")
        if self.kind != "external" and self.command:
            raise ValueError("command is only valid for the external backend")


@dataclass(frozen=True)
class Config:
    backend: Backend = Backend()
    caching: bool = True
    indexing: bool = True
    parallel: bool = True
    workers: int | None = None
    timeout: float | None = None
    tool_timeout: float | None = None
    step_bound: int = 100_000
    parallel_threshold: int = 16

    def resolved_workers(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        env = os.environ.get(WORKERS_ENV_VAR)
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                pass
        return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Inference-step log entries (the replayable proof trace)


@dataclass(frozen=True)
class DeduceStep:
    inner: int
    outer: int
    position: Position
    equation: int
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class OrientStep:
    equation: int
    rule: int
    direction: str  # "lr" | "rl"
    lhs: Term
    rhs: Term
    committed: tuple[tuple[Symbol, Symbol], ...]
    witness: str  # "internal" | "external"


@dataclass(frozen=True)
class DeleteStep:
    equation: int


@dataclass(frozen=True)
class SimplifyStep:
    equation: int
    new_equation: int
    lhs_steps: tuple[RewriteStep, ...]
    rhs_steps: tuple[RewriteStep, ...]
    new_lhs: Term
    new_rhs: Term


@dataclass(frozen=True)
class ComposeStep:
    rule: int
    new_rule: int
    steps: tuple[RewriteStep, ...]
    new_rhs: Term


@dataclass(frozen=True)
class CollapseStep:
    rule: int
    collapser: int
    position: Position
    equation: int
    lhs: Term
    rhs: Term


InferenceStep = (
    DeduceStep
    | OrientStep
    | DeleteStep
    | SimplifyStep
    | ComposeStep
    | CollapseStep
)


# ---------------------------------------------------------------------------
# Critical pairs


@dataclass(frozen=True)
class Overlap:
    """Renamed rule ``inner`` unified into a function position of rule
    ``outer``'s left-hand side."""

    inner: int
    outer: int
    position: Position
    mgu: Subst


@dataclass(frozen=True)
class CriticalPair:
    left: Term
    right: Term
    source: Overlap


def _critical_pairs_core(
    rules: RuleSet,
    i: int,
    j: int,
    use_index: bool,
    query_memo: dict | None = None,
) -> list[tuple[Position, Subst, Term, Term]]:
    rule_i = rules.get(i)
    rule_j = rules.get(j)
    avoid = variables(rule_j.lhs) | variables(rule_j.rhs)
    lhs_i, rhs_i = rename_apart_many((rule_i.lhs, rule_i.rhs), avoid)
    out: list[tuple[Position, Subst, Term, Term]] = []
    for pos, sub in positions(rule_j.lhs):
        if isinstance(sub, Var):
            continue
        if i == j and not pos:
            continue  # variant self-overlap at the root
        if use_index:
            # the same (outer, position) query serves every inner rule
            if query_memo is None:
                candidates = rules.tree.candidates_unifiable(sub)
            else:
                key = (j, pos)
                candidates = query_memo.get(key)
                if candidates is None:
                    candidates = rules.tree.candidates_unifiable(sub)
                    query_memo[key] = candidates
            if i not in candidates:
                continue
        try:
            sigma = unify(lhs_i, sub)
        except UnificationError:
            continue
        left = sigma.apply(replace_at(rule_j.lhs, pos, rhs_i))
        right = sigma.apply(rule_j.rhs)
        out.append((pos, sigma, left, right))
    return out


def critical_pairs_between(
    rules: RuleSet, i: int, j: int, use_index: bool = True
) -> tuple[CriticalPair, ...]:
    """All critical pairs from overlapping rule ``i`` into rule ``j``."""
    return tuple(
        CriticalPair(left, right, Overlap(i, j, pos, sigma))
        for pos, sigma, left, right in _critical_pairs_core(
            rules, i, j, use_index
        )
    )


# ---------------------------------------------------------------------------
# State


@dataclass
class Caches:
    """The four result caches.

    ``overlaps`` holds ordered rule-index pairs whose critical pairs were
    already computed; the other three map an equation or rule index to the
    set of rule indices already tried against it.  Because modified
    objects always get fresh indices, stale entries are never consulted
    and no invalidation is needed.
    """

    overlaps: set[tuple[int, int]] = field(default_factory=set)
    compose: dict[int, set[int]] = field(default_factory=dict)
    collapse: dict[int, set[int]] = field(default_factory=dict)
    simplify: dict[int, set[int]] = field(default_factory=dict)


class CompletionState:
    """Everything one run owns: (E, R), caches, order state and the log."""

    def __init__(
        self, equations: Sequence[tuple[Term, Term]], config: Config
    ):
        self.config = config
        self.alloc = IndexAllocator()
        self.eqs = EquationSet(self.alloc)
        self.rules = RuleSet(self.alloc)
        self.caches = Caches()
        self.log: list[InferenceStep] = []
        self.skipped: set[tuple] = set()
        self.deadline = Deadline.after(config.timeout)
        self.symbol_order: list[Symbol] = []
        for lhs, rhs in equations:
            self.eqs.add(lhs, rhs)
            for t in (lhs, rhs):
                for sym in symbols_of(t):
                    if sym not in self.symbol_order:
                        self.symbol_order.append(sym)
        self.initial = tuple(self.eqs)
        self.order: OrderState | None = None
        if config.backend.kind in ("lpo", "kbo"):
            self.order = OrderState(kind=config.backend.kind)
            self.order.note_symbols(self.symbol_order)
        self._pool: ProcessPoolExecutor | None = None

    # -- worker pool ------------------------------------------------------

    def pool(self) -> ProcessPoolExecutor:
        if self._pool is None:
            self._pool = ProcessPoolExecutor(
                max_workers=self.config.resolved_workers()
            )
        return self._pool

    def shutdown_pool(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=False, cancel_futures=True)
            self._pool = None

    def note_rules_changed(self) -> None:
        self.skipped.clear()

    # -- convenience ------------------------------------------------------

    def live_rule_indices(self) -> frozenset[int]:
        return frozenset(self.rules.indices())

    def tool_budget(self) -> float | None:
        if self.config.tool_timeout is not None:
            return self.config.tool_timeout
        return self.deadline.remaining()


# ---------------------------------------------------------------------------
# Deterministic task execution (sequential or on the pool)


def _chunked(tasks: list, n: int) -> list[list]:
    size, extra = divmod(len(tasks), n)
    out, start = [], 0
    for k in range(n):
        end = start + size + (1 if k < extra else 0)
        if end > start:
            out.append(tasks[start:end])
        start = end
    return out


def _run_tasks(state: CompletionState, worker, tasks: list) -> list:
    """Run ``worker`` over ``tasks``, returning results in task order.

    The parallel path submits contiguous chunks and collects them in
    submission order, so the merged result is identical to the sequential
    path by construction.
    """
    if not tasks:
        return []
    payload = (
        state.rules,
        state.config.indexing,
        state.config.step_bound,
        state.deadline.at,
    )
    workers = state.config.resolved_workers()
    use_pool = (
        state.config.parallel
        and workers > 1  # a one-process pool is pure dispatch overhead
        and len(tasks) >= state.config.parallel_threshold
    )
    if not use_pool:
        # batching lets workers reuse per-batch scratch state; deadline
        # responsiveness is preserved by the per-task checks inside them
        out = []
        for start in range(0, len(tasks), 4096):
            state.deadline.check()
            out.extend(worker(payload, tasks[start : start + 4096]))
        return out
    chunks = _chunked(tasks, min(len(tasks), workers * 4))
    pool = state.pool()
    futures = [pool.submit(worker, payload, chunk) for chunk in chunks]
    out = []
    try:
        for fut in futures:
            try:
                out.extend(fut.result(timeout=state.deadline.remaining()))
            except FutureTimeoutError:
                raise BudgetExceeded() from None
    except BaseException:
        for fut in futures:
            fut.cancel()
        raise
    return out


# ---------------------------------------------------------------------------
# Workers (top-level so the process pool can import them by reference)


def _simplify_worker(payload, tasks):
    rules, use_index, step_bound, deadline_at = payload
    deadline = Deadline(deadline_at)
    out = []
    for eq_index, lhs, rhs, allowed in tasks:
        deadline.check()
        probe = rewrite_once(lhs, rules, use_index, allowed=allowed)
        if probe is None:
            probe = rewrite_once(rhs, rules, use_index, allowed=allowed)
        if probe is None:
            out.append((eq_index, None))
            continue
        new_lhs, lhs_steps = normalize(
            lhs, rules, use_index, step_bound, deadline
        )
        new_rhs, rhs_steps = normalize(
            rhs, rules, use_index, step_bound, deadline
        )
        out.append((eq_index, (new_lhs, new_rhs, lhs_steps, rhs_steps)))
    return out


def _compose_worker(payload, tasks):
    rules, use_index, step_bound, deadline_at = payload
    deadline = Deadline(deadline_at)
    out = []
    for rule_index, rhs, allowed in tasks:
        deadline.check()
        probe = rewrite_once(rhs, rules, use_index, allowed=allowed)
        if probe is None:
            out.append((rule_index, None))
            continue
        full = frozenset(rules.indices()) - {rule_index}
        new_rhs, steps = normalize(
            rhs, rules, use_index, step_bound, deadline, allowed=full
        )
        out.append((rule_index, (new_rhs, steps)))
    return out


def _collapse_worker(payload, tasks):
    rules, use_index, _step_bound, deadline_at = payload
    deadline = Deadline(deadline_at)
    out = []
    for rule_index, lhs, allowed in tasks:
        deadline.check()
        direct = len(allowed) <= 4
        found = None
        for pos, sub in _postorder(lhs):
            if isinstance(sub, Var):
                continue
            if direct:
                candidates = sorted(allowed)
            elif use_index:
                candidates = sorted(rules.tree.candidates_matching(sub))
            else:
                candidates = rules.indices()
            for cand in candidates:
                if cand not in allowed:
                    continue
                other = rules.get(cand)
                sigma = match(other.lhs, sub)
                if sigma is None:
                    continue
                if not encompassment_strict(lhs, other.lhs):
                    continue
                reduct = replace_at(lhs, pos, sigma.apply(other.rhs))
                found = (cand, pos, sigma, reduct)
                break
            if found:
                break
        out.append((rule_index, found))
    return out


def _deduce_worker(payload, tasks):
    rules, use_index, _step_bound, deadline_at = payload
    deadline = Deadline(deadline_at)
    memo: dict = {}
    out = []
    for i, j in tasks:
        deadline.check()
        cps = _critical_pairs_core(rules, i, j, use_index, query_memo=memo)
        out.append(((i, j), [(pos, left, right) for pos, _, left, right in cps]))
    return out


# ---------------------------------------------------------------------------
# Phase implementations


def simplify_phase(state: CompletionState) -> None:
    """Normalize both sides of every equation (left side first), drawing
    candidate rules from the cache of not-yet-tried rules."""
    caching = state.config.caching
    live = state.live_rule_indices()
    tasks = []
    for eq in state.eqs:
        if caching:
            tried = state.caches.simplify.get(eq.index, set())
            allowed = frozenset(live - tried)
            if not allowed:
                continue
        else:
            allowed = None
        tasks.append((eq.index, eq.lhs, eq.rhs, allowed))
    results = _run_tasks(state, _simplify_worker, tasks)
    for task, (eq_index, outcome) in zip(tasks, results):
        if outcome is None:
            if caching:
                state.caches.simplify.setdefault(eq_index, set()).update(
                    task[3]
                )
            continue
        new_lhs, new_rhs, lhs_steps, rhs_steps = outcome
        state.eqs.remove(eq_index)
        state.caches.simplify.pop(eq_index, None)
        new_eq = state.eqs.add(new_lhs, new_rhs)
        if caching:
            # both sides are now in normal form w.r.t. every live rule
            state.caches.simplify[new_eq.index] = set(live)
        state.log.append(
            SimplifyStep(
                eq_index, new_eq.index, lhs_steps, rhs_steps, new_lhs, new_rhs
            )
        )


def delete_phase(state: CompletionState) -> None:
    """Drop every equation whose sides are syntactically equal."""
    for eq in list(state.eqs):
        if eq.lhs == eq.rhs:
            state.eqs.remove(eq.index)
            state.caches.simplify.pop(eq.index, None)
            state.log.append(DeleteStep(eq.index))


def success_check(state: CompletionState) -> bool:
    """Complete iff E is empty and every critical pair of R is joinable.

    Shares the overlap cache with Deduce: pairs whose critical pairs were
    already computed (and therefore absorbed into E) are skipped.  A pair
    is recorded here only when all its critical pairs join, so a negative
    scan never hides an overlap from a later Deduce.
    """
    if len(state.eqs) > 0:
        return False
    caching = state.config.caching
    use_index = state.config.indexing
    live = state.rules.indices()
    for i in live:
        for j in live:
            if caching and (i, j) in state.caches.overlaps:
                continue
            state.deadline.check()
            joined = True
            for _pos, _sigma, left, right in _critical_pairs_core(
                state.rules, i, j, use_index
            ):
                nf_l, _ = normalize(
                    left,
                    state.rules,
                    use_index,
                    state.config.step_bound,
                    state.deadline,
                )
                nf_r, _ = normalize(
                    right,
                    state.rules,
                    use_index,
                    state.config.step_bound,
                    state.deadline,
                )
                if nf_l != nf_r:
                    joined = False
                    break
            if not joined:
                return False
            if caching:
                state.caches.overlaps.add((i, j))
    return True


def choose_equation(state: CompletionState) -> int | None:
    """Smallest non-skipped equation by combined side size; ties go to the
    lowest index.  None when everything live is marked skipped."""
    skipped = state.skipped
    best: tuple[int, int] | None = None
    for eq in state.eqs:
        if skipped and unordered_pair_key(eq.lhs, eq.rhs) in skipped:
            continue
        size = eq.size()
        if best is None or size < best[0]:
            best = (size, eq.index)
    return None if best is None else best[1]


def orient_phase(state: CompletionState, eq_index: int) -> bool:
    """Try to orient one equation into a rule.

    Internal backends search for a minimal precedence extension; the
    external backend asks the tool to certify R plus the candidate rule,
    trying left-to-right first.  Unorientable equations are marked skipped
    (marks are cleared whenever R changes) rather than failing the run.
    """
    eq = state.eqs.get(eq_index)
    directed: tuple[Term, Term] | None = None
    direction = "lr"
    committed: tuple[tuple[Symbol, Symbol], ...] = ()
    witness = "internal"
    if state.order is not None:
        try:
            res = state.order.try_orient(eq.lhs, eq.rhs)
        except InadmissibleWeightsError:
            res = None
        if res is not None:
            direction, committed = res
            directed = (
                (eq.lhs, eq.rhs) if direction == "lr" else (eq.rhs, eq.lhs)
            )
    else:
        witness = "external"
        command = state.config.backend.command
        assert command is not None
        for cand_direction, (lhs, rhs) in (
            ("lr", (eq.lhs, eq.rhs)),
            ("rl", (eq.rhs, eq.lhs)),
        ):
            if isinstance(lhs, Var) or not variables(rhs) <= variables(lhs):
                continue
            verdict = external_terminates(
                command,
                state.rules.pairs() + [(lhs, rhs)],
                timeout=state.tool_budget(),
            )
            if verdict == "YES":
                direction = cand_direction
                directed = (lhs, rhs)
                break
    if directed is None:
        state.skipped.add(unordered_pair_key(eq.lhs, eq.rhs))
        return False
    state.eqs.remove(eq_index)
    state.caches.simplify.pop(eq_index, None)
    rule = state.rules.add(*directed)
    state.log.append(
        OrientStep(
            eq_index, rule.index, direction, directed[0], directed[1],
            committed, witness,
        )
    )
    state.note_rules_changed()
    return True


def _citation_order(cites: dict[int, set[int]]) -> list[int]:
    """Order phase results so that a result citing rule A is applied while
    A is still live: citers come before the rules they cite.

    A citation cycle would witness a non-terminating rule set, which the
    reduction order rules out; it can only appear under a lying external
    tool, so it is reported as a soundness error.
    """
    indegree = {idx: 0 for idx in cites}
    for idx, cited in cites.items():
        for c in cited:
            indegree[c] += 1
    ready = [idx for idx, d in indegree.items() if d == 0]
    out: list[int] = []
    heapq.heapify(ready)
    while ready:
        idx = heapq.heappop(ready)
        out.append(idx)
        for c in sorted(cites[idx]):
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(ready, c)
    if len(out) != len(cites):
        raise SoundnessError(
            "cyclic rewrite dependencies between rules; "
            "the rule set cannot be terminating"
        )
    return out


def compose_phase(state: CompletionState) -> None:
    """Normalize every rule's right-hand side with the other rules."""
    caching = state.config.caching
    live = state.live_rule_indices()
    tasks = []
    for rule in state.rules:
        if caching:
            tried = state.caches.compose.get(rule.index, set())
            allowed = frozenset(live - {rule.index} - tried)
            if not allowed:
                continue
        else:
            allowed = frozenset(live - {rule.index})
        tasks.append((rule.index, rule.rhs, allowed))
    results = _run_tasks(state, _compose_worker, tasks)
    changed: dict[int, tuple[Term, tuple[RewriteStep, ...]]] = {}
    for task, (rule_index, outcome) in zip(tasks, results):
        if outcome is None:
            if caching:
                state.caches.compose.setdefault(rule_index, set()).update(
                    task[2]
                )
        else:
            changed[rule_index] = outcome
    if not changed:
        return
    cites = {
        idx: {s.rule_index for s in steps if s.rule_index in changed}
        for idx, (_rhs, steps) in changed.items()
    }
    for idx in _citation_order(cites):
        new_rhs, steps = changed[idx]
        old = state.rules.remove(idx)
        state.caches.compose.pop(idx, None)
        state.caches.collapse.pop(idx, None)
        new_rule = state.rules.add(old.lhs, new_rhs)
        if caching:
            # the new right side is in normal form w.r.t. the snapshot
            state.caches.compose[new_rule.index] = set(live - {idx})
        state.log.append(ComposeStep(idx, new_rule.index, steps, new_rhs))
    state.note_rules_changed()


def collapse_phase(state: CompletionState) -> None:
    """Remove rules whose left-hand side reduces by a strictly more
    general rule, re-issuing the reduct as an equation."""
    caching = state.config.caching
    live = state.live_rule_indices()
    tasks = []
    for rule in state.rules:
        if caching:
            tried = state.caches.collapse.get(rule.index, set())
            allowed = frozenset(live - {rule.index} - tried)
            if not allowed:
                continue
        else:
            allowed = frozenset(live - {rule.index})
        tasks.append((rule.index, rule.lhs, allowed))
    results = _run_tasks(state, _collapse_worker, tasks)
    found: dict[int, tuple[int, Position, Subst, Term]] = {}
    for task, (rule_index, outcome) in zip(tasks, results):
        if outcome is None:
            if caching:
                state.caches.collapse.setdefault(rule_index, set()).update(
                    task[2]
                )
        else:
            found[rule_index] = outcome
    if not found:
        return
    cites = {
        idx: {cand} & found.keys()
        for idx, (cand, _pos, _sigma, _reduct) in found.items()
    }
    for idx in _citation_order(cites):
        cand, pos, _sigma, reduct = found[idx]
        old = state.rules.remove(idx)
        state.caches.compose.pop(idx, None)
        state.caches.collapse.pop(idx, None)
        new_eq = state.eqs.add(reduct, old.rhs)
        state.log.append(
            CollapseStep(idx, cand, pos, new_eq.index, reduct, old.rhs)
        )
    state.note_rules_changed()


def deduce_phase(state: CompletionState) -> None:
    """Compute critical pairs for every overlap not yet recorded and add
    them to E as fresh equations."""
    caching = state.config.caching
    live = state.rules.indices()
    pairs = [
        (i, j)
        for i in live
        for j in live
        if not caching or (i, j) not in state.caches.overlaps
    ]
    pairs.sort()
    results = _run_tasks(state, _deduce_worker, pairs)
    for (i, j), cps in results:
        if caching:
            state.caches.overlaps.add((i, j))
        for pos, left, right in cps:
            new_eq = state.eqs.add(left, right)
            state.log.append(
                DeduceStep(i, j, pos, new_eq.index, left, right)
            )


# ---------------------------------------------------------------------------
# Results and the driver


@dataclass
class Success:
    rules: tuple
    state: CompletionState
    verdict: str = "success"


@dataclass
class Fail:
    state: CompletionState
    verdict: str = "fail"


@dataclass
class Timeout:
    state: CompletionState
    verdict: str = "timeout"


CompletionResult = Success | Fail | Timeout


def complete(
    equations: Sequence[tuple[Term, Term]], config: Config = Config()
) -> CompletionResult:
    """Run automatic completion on the given equations.

    Success means E was exhausted and every critical pair of the final
    rule set joins; Fail means equations remain but none can be oriented;
    Timeout means the wall-clock budget elapsed first.
    """
    state = CompletionState(equations, config)
    try:
        while True:
            state.deadline.check()
            simplify_phase(state)
            delete_phase(state)
            if success_check(state):
                return Success(tuple(state.rules), state)
            eq_index = choose_equation(state)
            if eq_index is None:
                return Fail(state)
            orient_phase(state, eq_index)
            compose_phase(state)
            collapse_phase(state)
            deduce_phase(state)
    except BudgetExceeded:
        return Timeout(state)
    finally:
        state.shutdown_pool()
