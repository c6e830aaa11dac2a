import pytest

from genterms import TermGen, make_signature
from lqccs.errors import EvalError, QubitCaptureError
from lqccs.parser import parse_process, pretty
from lqccs.rewrite import (
    congruent,
    congruent_observer,
    eval_expr,
    normalize,
    normalize_observer,
    substitute,
)
from lqccs.syntax import BinOp, BoolLit, NatLit, Par, QubitLit, Sum, Var


def P(text):
    return parse_process(text, make_signature())


class TestEval:
    def test_literal_comparison(self):
        assert eval_expr(BinOp("=", NatLit(1), NatLit(0))) is False

    def test_digit_equality_formula(self):
        # (1-b)(1-b') + bb' with b = b' = 1
        b, bp = NatLit(1), NatLit(1)
        e = BinOp(
            "+",
            BinOp("*", BinOp("-", NatLit(1), b), BinOp("-", NatLit(1), bp)),
            BinOp("*", b, bp),
        )
        assert eval_expr(e) == 1

    def test_env_lookup_and_comparison(self):
        assert eval_expr(BinOp("<=", Var("x"), NatLit(2)), {"x": 3}) is False

    def test_unbound_variable(self):
        with pytest.raises(EvalError):
            eval_expr(Var("nope"))

    def test_type_mismatch(self):
        with pytest.raises(EvalError):
            eval_expr(BinOp("and", NatLit(1), BoolLit(True)))


class TestNormalize:
    def test_ite_on_literals(self):
        assert normalize(P("if 1 = 0 then k!0 else k!1")) == P("k!1")

    def test_parallel_unit(self):
        assert normalize(P("c!q1 || nil")) == normalize(P("c!q1"))

    def test_parallel_commutes(self):
        assert congruent(P("c!q1 || disc(q2)"), P("disc(q2) || c!q1"))

    def test_sum_commutes_and_drops_empty_nil(self):
        assert congruent(P("k!0 + k!1"), P("k!1 + k!0"))
        assert congruent(P("k!0 + nil"), P("k!0"))

    def test_sum_unit_keeps_discards(self):
        # dropping a non-empty discard would change the typing
        assert not congruent(P("k!0 + disc(q1)"), P("k!0"))

    def test_discard_tuple_is_a_set(self):
        assert congruent(P("disc(q1, q2)"), P("disc(q2, q1)"))

    def test_restriction_pushes_past_unrelated(self):
        t = normalize(P("(c!q1 || k!0 || k?x.nil) \\ k"))
        assert t == normalize(Par(P("(k!0 || k?x.nil) \\ k"), P("c!q1")))

    def test_unused_restriction_dropped(self):
        assert congruent(P("c!q1 \\ k"), P("c!q1"))
        assert congruent(P("disc(q1) \\ k"), P("disc(q1)"))

    def test_restriction_order_irrelevant(self):
        a = P("(k!0 || k?x.l!true || l?y.nil) \\ k \\ l")
        b = P("(k!0 || k?x.l!true || l?y.nil) \\ l \\ k")
        assert congruent(a, b)

    def test_tau_is_not_erased(self):
        assert not congruent(P("tau.k!0"), P("k!0"))

    def test_closed_expressions_evaluate(self):
        assert normalize(P("k!(1 + 2)")) == P("k!3")

    def test_idempotent_on_generated(self):
        sig = make_signature()
        for seed in range(150):
            gen = TermGen(seed, sig)
            t = gen.process(frozenset({"q1", "q2"}), {}, 4)
            n = normalize(t)
            assert normalize(n) == n

    def test_congruence_rule_instances(self):
        sig = make_signature()
        for seed in range(60):
            gen = TermGen(seed, sig)
            p = gen.process(frozenset({"q1"}), {}, 2)
            q = gen.process(frozenset({"q2"}), {}, 2)
            assert congruent(Par(p, q), Par(q, p))
            assert congruent(Par(p, P("nil")), p)
            g1 = gen._guard(frozenset({"q1"}), {}, 1)
            g2 = gen._guard(frozenset({"q1"}), {}, 1)
            assert congruent(Sum(g1, g2), Sum(g2, g1))


class TestObserverCongruence:
    def test_sum_nil_dropped(self):
        r = normalize_observer(P("c?x.disc(x) + nil"))
        assert r == P("c?x.disc(x)")

    def test_parallel_not_reordered(self):
        a = normalize_observer(P("k!0 || l!true"))
        b = normalize_observer(P("l!true || k!0"))
        assert a != b
        assert not congruent_observer(P("k!0 || l!true"), P("l!true || k!0"))
        # the full process congruence does equate them
        assert congruent(P("k!0 || l!true"), P("l!true || k!0"))

    def test_conditional_resolves(self):
        assert normalize_observer(P("if true then k!0 else k!1")) == P("k!0")


class TestSubstitute:
    def test_classical_substitution(self):
        t = substitute(P("if x = 0 then k!0 else k!1"), "x", 0)
        assert normalize(t) == P("k!0")

    def test_qubit_substitution(self):
        sig = make_signature()
        t = parse_process("c!x")
        assert substitute(t, "x", QubitLit("q1")) == parse_process("c!q1", sig)

    def test_shadowing(self):
        t = P("k?x.k!x")
        assert substitute(t, "x", 3) == t

    def test_qubit_capture_rejected(self):
        t = parse_process("c!x || disc(q)")
        with pytest.raises(QubitCaptureError):
            substitute(t, "x", QubitLit("q"))


def test_congruent_terms_print_differently_but_normalize_alike():
    sig = make_signature()
    for seed in range(80):
        gen = TermGen(seed, sig)
        t = gen.process(frozenset({"q1", "q2"}), {}, 3)
        assert congruent(t, normalize(t))
        assert pretty(normalize(t)) == pretty(normalize(normalize(t)))
