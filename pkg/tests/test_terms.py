import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kbcomplete.terms import (
    App,
    ClashError,
    InvalidPositionError,
    OccursCheckError,
    Subst,
    Symbol,
    UnificationError,
    Var,
    canonical_terms,
    match,
    pair_key,
    positions,
    rename_apart,
    rename_apart_many,
    replace_at,
    subterm_at,
    term_size,
    unify,
    unordered_pair_key,
    variables,
    variant,
)

from .util import (
    OracleClash,
    OracleOccurs,
    a,
    b,
    c,
    f,
    g,
    h,
    oracle_apply,
    oracle_unify,
    subst_equal,
    term_strategy,
    x,
    y,
    z,
)


class TestTermBasics:
    def test_arity_enforced(self):
        with pytest.raises(ValueError):
            App(Symbol("f", 2), (a,))

    def test_symbol_name_nonempty(self):
        with pytest.raises(ValueError):
            Symbol("", 0)

    def test_structural_equality(self):
        assert f(a, g(b)) == f(a, g(b))
        assert f(a, b) != f(b, a)
        assert Var(0) == Var(0)
        assert Var(0) != Var(1)

    def test_term_size(self):
        assert term_size(x) == 1
        assert term_size(g(x)) == 2
        assert term_size(f(g(a), x)) == 4


class TestPositions:
    def test_subterm_at_root(self):
        t = f(a, g(b))
        assert subterm_at(t, ()) is t

    def test_subterm_at_nested(self):
        assert subterm_at(f(a, g(b)), (2, 1)) == b

    def test_subterm_at_invalid(self):
        with pytest.raises(InvalidPositionError):
            subterm_at(a, (1,))
        with pytest.raises(InvalidPositionError):
            subterm_at(f(a, b), (3,))

    def test_replace_at_root(self):
        assert replace_at(f(a, b), (), c) == c

    def test_replace_at_child(self):
        assert replace_at(f(a, b), (2,), c) == f(a, c)

    def test_replace_at_nested(self):
        assert replace_at(g(g(a)), (1, 1), b) == g(g(b))

    def test_replace_invalid(self):
        with pytest.raises(InvalidPositionError):
            replace_at(a, (1,), b)

    def test_positions_preorder(self):
        t = f(g(a), x)
        assert [p for p, _ in positions(t)] == [(), (1,), (1, 1), (2,)]

    @given(term_strategy())
    def test_replace_with_own_subterm_is_identity(self, t):
        for pos, sub in positions(t):
            assert replace_at(t, pos, sub) == t


class TestSubst:
    def test_apply_simple(self):
        s = Subst({0: a})
        assert s.apply(f(x, y)) == f(a, y)

    def test_apply_empty_identity(self):
        t = f(g(x), b)
        assert Subst().apply(t) is t

    def test_apply_duplicates(self):
        s = Subst({0: g(y)})
        assert s.apply(f(x, x)) == f(g(y), g(y))

    def test_identity_bindings_dropped(self):
        s = Subst({0: Var(0), 1: a})
        assert s.domain() == {1}

    def test_sharing_preserved(self):
        t = f(a, b)
        assert Subst({5: c}).apply(t) is t


class TestUnify:
    def test_variable_binding(self):
        assert subst_equal(unify(x, g(a)), {0: g(a)})

    def test_derived_example_against_oracle(self):
        # frozen from the rule-based oracle: x -> a, y -> b
        s, t = f(x, b), f(a, y)
        expect = oracle_unify(s, t)
        assert expect == {0: a, 1: b}
        assert subst_equal(unify(s, t), expect)

    def test_occurs_check(self):
        with pytest.raises(OccursCheckError):
            unify(x, g(x))

    def test_clash(self):
        with pytest.raises(ClashError):
            unify(g(a), f(a, a))

    def test_deep_terms_no_stack_overflow(self):
        deep = x
        for _ in range(50_000):
            deep = g(deep)
        sigma = unify(y, deep)
        assert sigma.get(1) is deep

    @given(term_strategy(), term_strategy())
    @settings(max_examples=200)
    def test_agreement_with_oracle(self, s, t):
        try:
            expect = oracle_unify(s, t)
        except OracleClash:
            with pytest.raises(UnificationError):
                unify(s, t)
            return
        except OracleOccurs:
            with pytest.raises(UnificationError):
                unify(s, t)
            return
        sigma = unify(s, t)
        assert sigma.apply(s) == sigma.apply(t)
        # oracle result is a unifier of the same problem
        assert oracle_apply(expect, s) == oracle_apply(expect, t)

    @given(term_strategy(), term_strategy())
    @settings(max_examples=200)
    def test_unifier_idempotent(self, s, t):
        try:
            sigma = unify(s, t)
        except UnificationError:
            return
        for u in (s, t, f(s, t)):
            once = sigma.apply(u)
            assert sigma.apply(once) == once

    @given(term_strategy(), term_strategy())
    @settings(max_examples=200)
    def test_most_general(self, s, t):
        """Any oracle unifier must be an instance of ours."""
        try:
            sigma = unify(s, t)
        except UnificationError:
            return
        tau = oracle_unify(s, t)
        delta = match(sigma.apply(s), oracle_apply(tau, s))
        assert delta is not None


class TestMatch:
    def test_shared_variable(self):
        assert subst_equal(match(f(x, x), f(a, a)), {0: a})

    def test_inconsistent_binding(self):
        assert match(f(x, x), f(a, b)) is None

    def test_variable_pattern(self):
        assert subst_equal(match(x, g(y)), {0: g(y)})

    def test_symbol_mismatch(self):
        assert match(g(a), g(b)) is None
        assert match(g(x), f(a, a)) is None

    def test_pattern_var_against_var(self):
        assert match(f(x, y), f(y, x)) is not None
        assert match(f(a, x), f(x, a)) is None

    @given(term_strategy(), term_strategy())
    @settings(max_examples=200)
    def test_match_contract(self, p, s):
        sigma = match(p, s)
        if sigma is None:
            return
        assert sigma.apply(p) == s
        assert sigma.domain() <= variables(p)


class TestRenameApart:
    def test_avoids_given_variables(self):
        t = rename_apart(g(x), {0})
        assert isinstance(t, App)
        assert variables(t).isdisjoint({0})

    def test_ground_fixed(self):
        assert rename_apart(a, {0}) is a

    def test_disjoint_contract(self):
        t = f(x, y)
        renamed = rename_apart(t, {0, 1})
        assert variables(renamed).isdisjoint({0, 1})
        assert variant(t, renamed)

    def test_shared_renaming_across_terms(self):
        l, r = rename_apart_many((f(x, y), g(x)), {0, 1})
        lv = sorted(variables(l))
        assert variables(r) == {lv[0]}

    @given(term_strategy(), st.sets(st.integers(0, 6)))
    def test_inverse_renaming_restores(self, t, avoid):
        renamed = rename_apart(t, avoid)
        assert variables(renamed).isdisjoint(avoid)
        assert variant(t, renamed)


class TestVariantsAndKeys:
    def test_variant_positive(self):
        assert variant(f(x, y), f(y, x))
        assert variant(g(x), g(z))

    def test_variant_negative(self):
        assert not variant(f(x, x), f(x, y))
        assert not variant(g(a), g(b))

    def test_canonical_terms(self):
        l, r = canonical_terms((f(z, y), g(z)))
        assert l == f(Var(0), Var(1))
        assert r == g(Var(0))

    def test_pair_key_modulo_renaming(self):
        assert pair_key(g(x), x) == pair_key(g(z), z)
        assert pair_key(g(x), x) != pair_key(x, g(x))
        assert unordered_pair_key(g(x), x) == unordered_pair_key(z, g(z))
