import random

import pytest

from treetrans.affine import (
    App,
    CarrierOverflow,
    Const,
    Evaluator,
    FiniteInterpretation,
    HennieToLambda,
    LTypeError,
    Lam,
    LambdaError,
    LambdaTransducer,
    Pair,
    Proj,
    Signature,
    TransKey,
    Var,
    alpha_equal,
    carrier,
    compile_hennie_to_lambda,
    decode_tree,
    encode_tree,
    exa_lambda_transducer,
    finite_eval,
    fold_term,
    format_term,
    identity_lambda_transducer,
    inverse_regular,
    normalize,
    parse_term,
    precompose_lambda,
    recognizer_interpretation,
    run_lambda_transducer,
    step_lo,
    step_ri,
    typecheck,
    validate_simulation,
)
from treetrans.bottomup import Recognizer, total_automaton
from treetrans.corpus import all_trees
from treetrans.fixtures import exa_thm, mirror_thm, mirror_tree
from treetrans.hennie import cap_weight_reducing
from treetrans.lintypes import Lolli, O, With, format_type, parse_type, with_power
from treetrans.trees import EXA_ALPHABET, exa_oracle, format_tree, leaf, parse_tree
from treetrans.util import FrozenDict

ADD = Signature(EXA_ALPHABET, "additive")
MUL = Signature(EXA_ALPHABET, "multiplicative")
AB = parse_tree("a(b,b)")


class TestTypecheck:
    def test_additive_constant_application(self):
        term = App(Const("a"), Pair(Const("b"), Const("b")))
        assert typecheck(ADD, term) == O

    def test_pairs_share_the_context(self):
        term = Lam("x", Pair(Var("x"), Var("x")))
        b = With(O, O)
        assert typecheck(ADD, term, Lolli(O, With(O, O))) is not None
        assert typecheck(ADD, Lam("x", Pair(Var("x"), Var("x"))), Lolli(b, With(b, b)))

    def test_application_splits_the_context(self):
        term = Lam("x", App(App(Const("a"), Var("x")), Var("x")))
        with pytest.raises(LTypeError, match="twice"):
            typecheck(MUL, term, Lolli(O, O))

    def test_projection(self):
        term = Proj(2, Pair(Const("b"), Const("b")))
        assert typecheck(ADD, term) == O

    def test_failing_rule_reported(self):
        with pytest.raises(LTypeError) as e:
            typecheck(ADD, App(Const("b"), Const("b")))
        assert e.value.rule == "app"


class TestNormalize:
    def test_projection_rule(self):
        t = Proj(1, Pair(Const("b"), Const("c")))
        assert normalize(t) == Const("b")

    def test_beta_then_projection(self):
        inner = Pair(Const("b"), App(Const("a"), Pair(Const("b"), Const("b"))))
        t = App(Lam("x", Proj(1, Var("x"))), inner)
        assert normalize(t) == Const("b")

    def test_strategies_agree_on_random_terms(self):
        rng = random.Random(7)
        count = 0
        for _ in range(400):
            term, typ = _random_typed_term(rng, depth=4)
            if term is None:
                continue
            count += 1
            lo = normalize(term, strategy="lo", fuel=10**5)
            ri = normalize(term, strategy="ri", fuel=10**5)
            assert alpha_equal(lo, ri), format_term(term)
            if count >= 200:
                break
        assert count >= 200

    def test_subject_reduction(self):
        rng = random.Random(11)
        checked = 0
        for _ in range(300):
            term, typ = _random_typed_term(rng, depth=4)
            if term is None:
                continue
            cur = term
            while True:
                assert typecheck(ADD, cur, typ) == typ
                nxt = step_lo(cur)
                if nxt is None:
                    break
                cur = nxt
                checked += 1
        assert checked > 50


def _random_typed_term(rng, depth):
    """Small random closed well-typed terms over the additive signature."""

    def go(d, ctx):
        roll = rng.random()
        if d == 0 or roll < 0.35:
            choices = [(Const("b"), O)] + [(Var(x), t) for x, t in ctx.items()]
            return rng.choice(choices)
        if roll < 0.55:
            left, lt = go(d - 1, ctx)
            right, rt = go(d - 1, ctx)
            return Pair(left, right), With(lt, rt)
        if roll < 0.7:
            body, bt = go(d - 1, ctx)
            if not isinstance(bt, With):
                return body, bt
            i = rng.choice((1, 2))
            return Proj(i, body), (bt.left if i == 1 else bt.right)
        if roll < 0.85:
            name = f"v{len(ctx)}"
            arg_t = rng.choice((O, With(O, O)))
            body, bt = go(d - 1, {**ctx, name: arg_t})
            return Lam(name, body, ann=arg_t), Lolli(arg_t, bt)
        fn, ft = go(d - 1, ctx)
        if not isinstance(ft, Lolli):
            return fn, ft
        if ft.arg == O:
            return App(fn, Const("b")), ft.res
        if ft.arg == With(O, O):
            return App(fn, Pair(Const("b"), Const("b"))), ft.res
        return fn, ft

    term, typ = go(depth, {})
    try:
        typecheck(ADD, term, typ)
    except LTypeError:
        return None, None
    return term, typ


class TestEncodings:
    def test_additive_example(self):
        assert encode_tree(AB, ADD) == App(Const("a"), Pair(Const("b"), Const("b")))

    def test_multiplicative_example(self):
        assert encode_tree(AB, MUL) == App(App(Const("a"), Const("b")), Const("b"))

    def test_round_trip_both_modes(self):
        for sig in (ADD, MUL):
            for t in all_trees(EXA_ALPHABET, 10):
                term = encode_tree(t, sig)
                assert typecheck(sig, term) == O
                assert decode_tree(normalize(term), sig) == t

    def test_decode_rejects_non_canonical(self):
        with pytest.raises(LambdaError):
            decode_tree(Lam("x", Var("x")), ADD)

    def test_parse_print_round_trip(self):
        text = "\\x1. \\x2. <(pi2 x2) (a <pi1 x1, pi1 x1>), \\y. (pi2 x2) (a <y, y>)>"
        term = parse_term(text, ("a", "b"))
        assert parse_term(format_term(term), ("a", "b")) == term


class TestTransducers:
    def test_exa_on_leaf(self):
        lt = exa_lambda_transducer()
        assert run_lambda_transducer(lt, leaf("b")) == parse_tree("a(b,b)")

    def test_exa_matches_oracle(self):
        lt = exa_lambda_transducer()
        lt.validate_types()
        for t in all_trees(EXA_ALPHABET, 8):
            assert run_lambda_transducer(lt, t) == exa_oracle(t)

    def test_identity(self, tiny_corpus):
        lt = identity_lambda_transducer(EXA_ALPHABET)
        for t in tiny_corpus:
            assert run_lambda_transducer(lt, t) == t


def _mirror_lambda():
    """Multiplicative transducer swapping the children of every node."""
    x1, x2 = Var("x1"), Var("x2")
    return LambdaTransducer(
        memory_type=O,
        mode="multiplicative",
        input_alphabet=EXA_ALPHABET,
        output_alphabet=EXA_ALPHABET,
        transitions={
            "a": Lam("x1", Lam("x2", App(App(Const("a"), x2), x1))),
            "b": Const("b"),
        },
        output=Lam("z", Var("z")),
    )


@pytest.fixture(scope="module")
def compiled():
    capped = cap_weight_reducing(exa_thm(), 2, "blk")
    return HennieToLambda(capped)


class TestCompile:
    def test_on_leaf(self, compiled):
        lt = compiled.transducer()
        assert run_lambda_transducer(lt, leaf("b"), fuel=10**7) == parse_tree("a(b,b)")

    def test_oracle_sweep_tiny(self, compiled):
        lt = compiled.transducer()
        for t in all_trees(EXA_ALPHABET, 5):
            assert run_lambda_transducer(lt, t, fuel=10**8) == exa_oracle(t)

    def test_generated_terms_typecheck(self, compiled):
        n = compiled.depth
        rank2 = TransKey("a", compiled.m.top, (n, n), n)
        rank0 = TransKey("b", compiled.m.top, (), n)
        for key in (rank2, rank0):
            typ, body = compiled.defs[key]
            assert typecheck(compiled.sig, body, typ, defs=compiled.defs) == typ

    def test_rejects_non_weight_reducing(self):
        from treetrans.fixtures import identity_thm

        with pytest.raises(LambdaError, match="weight-reducing"):
            compile_hennie_to_lambda(identity_thm(EXA_ALPHABET))

    def test_simulation_steps(self, compiled):
        total = 0
        for t in all_trees(EXA_ALPHABET, 5):
            total += validate_simulation(compiled, t, 100)
        assert total >= 50


class TestPrecompose:
    def test_identity_inner(self):
        outer = exa_lambda_transducer()
        inner = identity_lambda_transducer(EXA_ALPHABET)
        lt = precompose_lambda(outer, inner)
        lt.validate_types()
        for t in all_trees(EXA_ALPHABET, 6):
            assert run_lambda_transducer(lt, t) == exa_oracle(t)

    def test_mirror_inner(self):
        lt = precompose_lambda(exa_lambda_transducer(), _mirror_lambda())
        for t in all_trees(EXA_ALPHABET, 6):
            assert run_lambda_transducer(lt, t) == exa_oracle(mirror_tree(t))

    def test_composed_types(self):
        lt = precompose_lambda(exa_lambda_transducer(), _mirror_lambda())
        lt.validate_types()
        assert format_type(lt.memory_type) == format_type(With(O, Lolli(O, O)))

    def test_additive_inner_rejected(self):
        with pytest.raises(LambdaError, match="multiplicative"):
            precompose_lambda(exa_lambda_transducer(), exa_lambda_transducer())


def xor_interpretation():
    a_table = FrozenDict({x: FrozenDict({y: x ^ y for y in (0, 1)}) for x in (0, 1)})
    return FiniteInterpretation((0, 1), {"a": a_table, "b": 1})


class TestFiniteEval:
    def test_xor_of_encoded_tree(self):
        interp = xor_interpretation()
        got = finite_eval(interp, encode_tree(AB, MUL))
        assert got == 0

    def test_projection_semantics(self):
        interp = xor_interpretation()
        t = Proj(1, Pair(Const("b"), Const("b")))
        assert finite_eval(interp, t) == finite_eval(interp, Const("b"))

    def test_compositionality(self):
        interp = xor_interpretation()
        f = Lam("x", App(App(Const("a"), Var("x")), Const("b")))
        arg = Const("b")
        ev = Evaluator(interp)
        assert ev.apply(ev.eval(f), ev.eval(arg)) == finite_eval(interp, App(f, arg))

    def test_matches_recognizer_on_corpus(self):
        # the denotation of a multiplicative encoding is the automaton value
        auto = total_automaton(EXA_ALPHABET, (0, 1), lambda s, k: 1 if s == "b" else k[0] ^ k[1])
        rec = Recognizer(auto, {0: 0, 1: 1})
        interp = recognizer_interpretation(rec, MUL)
        for t in all_trees(EXA_ALPHABET, 8):
            assert finite_eval(interp, encode_tree(t, MUL)) == auto.value(t)

    def test_carrier_cap(self):
        interp = FiniteInterpretation((0, 1), {}, cap=10)
        big = Lolli(Lolli(O, O), Lolli(O, O))
        with pytest.raises(CarrierOverflow):
            carrier(With(big, big), interp)


def _recognizers():
    gamma = EXA_ALPHABET
    root = Recognizer(total_automaton(gamma, gamma.names(), lambda s, k: s), {s: s for s in gamma.names()})
    parity = Recognizer(
        total_automaton(gamma, (0, 1), lambda s, k: 1 if not k else sum(k) % 2),
        {0: 0, 1: 1},
    )
    return root, parity


class TestInverseRegular:
    def test_root_label_against_exa(self):
        root, _ = _recognizers()
        lt = exa_lambda_transducer()
        inv = inverse_regular(lt, root, accepting={"a"})
        for t in all_trees(EXA_ALPHABET, 7):
            assert inv.classify(t)  # every output is pbt(n >= 1)

    def test_leaf_parity(self):
        _, parity = _recognizers()
        lt = exa_lambda_transducer()
        inv = inverse_regular(lt, parity, accepting={0})
        for t in all_trees(EXA_ALPHABET, 7):
            want = parity.classify(run_lambda_transducer(lt, t)) == 0
            assert inv.classify(t) == want

    def test_all_trees_language(self):
        root, _ = _recognizers()
        lt = identity_lambda_transducer(EXA_ALPHABET)
        inv = inverse_regular(lt, root, accepting=set(EXA_ALPHABET.names()))
        assert all(inv.classify(t) for t in all_trees(EXA_ALPHABET, 7))

    def test_contains_marker_via_denotation(self):
        # the compiled cap machine's carrier is far beyond tabulation, but the
        # closure-based denotation still decides marker-freeness per input
        capped = cap_weight_reducing(exa_thm(), 2, "blk")
        comp = HennieToLambda(capped)
        lt = comp.transducer()
        gamma = capped.output_alphabet
        auto = total_automaton(
            gamma, ("no", "yes"), lambda s, k: "yes" if s == "blk" or "yes" in k else "no"
        )
        rec = Recognizer(auto, {"no": "no", "yes": "yes"})
        interp = recognizer_interpretation(rec, lt.signature())
        ev = Evaluator(interp, lt.defs)
        for t in all_trees(EXA_ALPHABET, 5):
            val = ev.eval(App(lt.output, fold_term(lt, t)))
            assert val == rec.classify(run_lambda_transducer(lt, t, fuel=10**8))
            assert val == "no"
