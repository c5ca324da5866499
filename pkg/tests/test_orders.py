import itertools
import stat
import sys

import pytest
from hypothesis import given, settings

from kbcomplete.orders import (
    EMPTY_PRECEDENCE,
    ExternalToolError,
    InadmissibleWeightsError,
    KboWeights,
    OrderState,
    Precedence,
    external_terminates,
    kbo_gt,
    lpo_gt,
)
from kbcomplete.terms import App, Symbol

from .util import F, G, a, b, f, g, h, term_strategy, x, y, z

ALL1 = KboWeights()


def exhaustive_orientable(s, t, symbols):
    """Oracle: search every precedence over the signature for s > t."""
    pairs = [(p, q) for p in symbols for q in symbols if p != q]
    for size in range(len(pairs) + 1):
        for subset in itertools.combinations(pairs, size):
            try:
                prec = Precedence(subset)
            except ValueError:
                continue
            if lpo_gt(prec, s, t):
                return True
    return False


class TestPrecedence:
    def test_transitive_closure(self):
        s1, s2, s3 = Symbol("p", 0), Symbol("q", 0), Symbol("r", 0)
        prec = Precedence([(s1, s2), (s2, s3)])
        assert prec.gt(s1, s3)

    def test_cycle_rejected(self):
        s1, s2 = Symbol("p", 0), Symbol("q", 0)
        with pytest.raises(ValueError):
            Precedence([(s1, s2), (s2, s1)])

    def test_extended_returns_none_on_conflict(self):
        s1, s2 = Symbol("p", 0), Symbol("q", 0)
        prec = Precedence([(s1, s2)])
        assert prec.extended([(s2, s1)]) is None

    def test_extension_keeps_committed_pairs(self):
        s1, s2, s3 = Symbol("p", 0), Symbol("q", 0), Symbol("r", 0)
        prec = Precedence([(s1, s2)]).extended([(s2, s3)])
        assert prec is not None
        assert prec.gt(s1, s2) and prec.gt(s1, s3)


class TestLpo:
    def test_subterm_case(self):
        assert lpo_gt(EMPTY_PRECEDENCE, g(x), x)

    def test_precedence_case(self):
        prec = Precedence([(G, F)])
        assert lpo_gt(prec, g(x), f(x, x))
        assert not lpo_gt(EMPTY_PRECEDENCE, g(x), f(x, x))

    def test_distinct_variables_incomparable(self):
        assert not lpo_gt(EMPTY_PRECEDENCE, x, y)
        assert not lpo_gt(EMPTY_PRECEDENCE, y, x)

    def test_associativity_orients_without_precedence(self):
        # desk derivation: lexicographic case, then two subterm cases
        lhs = f(f(x, y), z)
        rhs = f(x, f(y, z))
        assert lpo_gt(EMPTY_PRECEDENCE, lhs, rhs)
        assert not lpo_gt(EMPTY_PRECEDENCE, rhs, lhs)

    def test_variable_containment_required(self):
        assert lpo_gt(EMPTY_PRECEDENCE, f(x, y), x)
        assert not lpo_gt(EMPTY_PRECEDENCE, f(x, x), y)

    @given(term_strategy(max_leaves=6))
    def test_irreflexive(self, t):
        assert not lpo_gt(EMPTY_PRECEDENCE, t, t)

    @given(
        term_strategy(max_leaves=5),
        term_strategy(max_leaves=5),
        term_strategy(max_leaves=5),
    )
    @settings(max_examples=150)
    def test_transitive_and_asymmetric(self, s, t, u):
        prec = Precedence([(F, G)])
        if lpo_gt(prec, s, t):
            assert not lpo_gt(prec, t, s)
            if lpo_gt(prec, t, u):
                assert lpo_gt(prec, s, u)

    @given(term_strategy(max_leaves=5), term_strategy(max_leaves=5))
    @settings(max_examples=100)
    def test_closure_under_context_and_substitution(self, s, t):
        prec = Precedence([(F, G)])
        if not lpo_gt(prec, s, t):
            return
        ground = {vid: g(a) for vid in range(3)}
        from kbcomplete.terms import Subst

        sigma = Subst(ground)
        si, ti = sigma.apply(s), sigma.apply(t)
        assert lpo_gt(prec, si, ti)
        assert lpo_gt(prec, f(si, b), f(ti, b))
        assert lpo_gt(prec, g(si), g(ti))


class TestKbo:
    def test_weight_decrease(self):
        assert kbo_gt(ALL1, EMPTY_PRECEDENCE, g(x), x)

    def test_variable_condition_fails(self):
        assert not kbo_gt(ALL1, EMPTY_PRECEDENCE, x, g(x))
        assert not kbo_gt(ALL1, EMPTY_PRECEDENCE, f(x, x), f(x, y))

    def test_incomparable_variables(self):
        assert not kbo_gt(ALL1, EMPTY_PRECEDENCE, g(x), g(y))

    def test_equal_weight_precedence_tiebreak(self):
        g2 = Symbol("g2", 1)
        prec = Precedence([(G, g2)])
        assert kbo_gt(ALL1, prec, g(x), App(g2, (x,)))

    def test_lexicographic_tiebreak(self):
        assert kbo_gt(ALL1, EMPTY_PRECEDENCE, f(g(x), y), f(x, g(y)))

    def test_inadmissible_weights_rejected(self):
        heavy = Symbol("k", 1)
        w = KboWeights(w0=1, weights={G: 0})
        prec = Precedence([(heavy, G)])  # weight-0 unary g not maximal
        with pytest.raises(InadmissibleWeightsError):
            kbo_gt(w, prec, g(x), x)

    def test_constant_lighter_than_variable_rejected(self):
        w = KboWeights(w0=2, weights={a.sym: 1})
        with pytest.raises(InadmissibleWeightsError):
            kbo_gt(w, EMPTY_PRECEDENCE, f(a, x), x)

    def test_unary_spine_special_case(self):
        w = KboWeights(w0=1, weights={G: 0})
        assert kbo_gt(w, EMPTY_PRECEDENCE, g(g(x)), x)

    @given(term_strategy(max_leaves=6))
    def test_irreflexive(self, t):
        assert not kbo_gt(ALL1, EMPTY_PRECEDENCE, t, t)

    @given(
        term_strategy(max_leaves=5),
        term_strategy(max_leaves=5),
        term_strategy(max_leaves=5),
    )
    @settings(max_examples=150)
    def test_transitive_and_asymmetric(self, s, t, u):
        if kbo_gt(ALL1, EMPTY_PRECEDENCE, s, t):
            assert not kbo_gt(ALL1, EMPTY_PRECEDENCE, t, s)
            if kbo_gt(ALL1, EMPTY_PRECEDENCE, t, u):
                assert kbo_gt(ALL1, EMPTY_PRECEDENCE, s, u)


class TestTryOrient:
    def make_state(self, kind="lpo"):
        state = OrderState(kind=kind)
        state.note_symbols([F, G, a.sym, b.sym])
        return state

    def test_subterm_orients_without_extension(self):
        state = self.make_state()
        assert state.try_orient(g(x), x) == ("lr", ())

    def test_commits_minimal_extension(self):
        # g(f-wrapped) vs f(g-wrapped): the oracle says both directions are
        # orientable with a one-pair extension; left-to-right must win.
        g2 = Symbol("gg", 1)
        f1 = Symbol("ff", 1)

        def ff(t):
            return App(f1, (t,))

        def gg(t):
            return App(g2, (t,))

        assert exhaustive_orientable(ff(gg(x)), gg(ff(x)), [f1, g2])
        assert exhaustive_orientable(gg(ff(x)), ff(gg(x)), [f1, g2])
        state = OrderState(kind="lpo")
        state.note_symbols([f1, g2])
        direction, added = state.try_orient(ff(gg(x)), gg(ff(x)))
        assert direction == "lr"
        assert added == ((f1, g2),)
        assert state.prec.gt(f1, g2)

    def test_unorientable_distinct_variables(self):
        state = self.make_state()
        assert state.try_orient(x, y) is None

    def test_reverse_direction_reported(self):
        state = self.make_state()
        assert state.try_orient(x, g(x)) == ("rl", ())

    def test_monotone_commitment(self):
        """Previously oriented rules stay oriented after later commits."""
        i = Symbol("i", 1)
        m = Symbol("m", 2)
        e = Symbol("e", 0)

        def mul(s, t):
            return App(m, (s, t))

        def inv(s):
            return App(i, (s,))

        eterm = App(e)
        state = OrderState(kind="lpo")
        state.note_symbols([m, i, e])
        oriented = []
        for lhs, rhs in [
            (mul(eterm, x), x),
            (mul(inv(x), x), eterm),
            (inv(mul(x, y)), mul(inv(y), inv(x))),
        ]:
            res = state.try_orient(lhs, rhs)
            assert res is not None
            direction, _ = res
            oriented.append((lhs, rhs) if direction == "lr" else (rhs, lhs))
            for l, r in oriented:
                assert state.gt(l, r)

    def test_kbo_state_orients(self):
        state = self.make_state(kind="kbo")
        assert state.try_orient(g(g(x)), g(x)) == ("lr", ())


def write_script(tmp_path, name, body):
    path = tmp_path / name
    path.write_text("#!/bin/sh\n" + body)
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return str(path)


class TestExternalTool:
    RULES = [(g(x), x)]

    def test_yes_verdict(self, tmp_path):
        tool = write_script(tmp_path, "yes.sh", "echo YES\n")
        assert external_terminates(tool, self.RULES) == "YES"

    def test_no_verdict_case_insensitive(self, tmp_path):
        tool = write_script(tmp_path, "no.sh", "echo no\n")
        assert external_terminates(tool, self.RULES) == "NO"

    def test_garbage_is_maybe(self, tmp_path):
        tool = write_script(tmp_path, "odd.sh", "echo certainly!\n")
        assert external_terminates(tool, self.RULES) == "MAYBE"

    def test_timeout_is_maybe(self, tmp_path):
        tool = write_script(tmp_path, "slow.sh", "sleep 30\necho YES\n")
        assert external_terminates(tool, self.RULES, timeout=0.3) == "MAYBE"

    def test_spawn_failure(self):
        with pytest.raises(ExternalToolError):
            external_terminates("/does/not/exist", self.RULES)

    def test_tool_receives_wellformed_input(self, tmp_path):
        out = tmp_path / "seen.txt"
        tool = write_script(tmp_path, "tee.sh", f"cat > {out}\necho YES\n")
        external_terminates(tool, [(f(g(x), y), g(y))])
        from kbcomplete.tpdb import parse_problem

        pf = parse_problem(out.read_text())
        assert len(pf.equations) == 1

    def test_bundled_checker_terminating(self):
        cmd = f"{sys.executable} -m kbcomplete.termtool"
        assert external_terminates(cmd, [(g(x), x)]) == "YES"

    def test_bundled_checker_looping(self):
        cmd = f"{sys.executable} -m kbcomplete.termtool"
        # g(x) -> g(g(x)) loops; the checker may not prove it, but it must
        # never answer YES
        assert external_terminates(cmd, [(g(x), g(g(x)))]) in ("NO", "MAYBE")

    def test_bundled_checker_extra_rhs_variable(self):
        cmd = f"{sys.executable} -m kbcomplete.termtool"
        assert external_terminates(cmd, [(g(x), f(x, y))]) == "NO"
