import pytest

from treetrans.corpus import all_trees
from treetrans.fixtures import exa_mtt, exa_thm, identity_mtt
from treetrans.generic import Completed, run_generic
from treetrans.hennie import check_visit_bound, hennie_semantics, run_hennie
from treetrans.mtt import (
    HOLE,
    Blk,
    Call,
    MttError,
    MttSpec,
    Param,
    Redex,
    compile_mtt_to_hennie,
    extend_blackbox,
    height_black,
    mtt_generic,
    mtt_step,
    nesting_report,
    outermost_redexes_invariant,
    punch,
    punchings,
    run_mtt,
)
from treetrans.trees import EXA_ALPHABET, Tree, exa_oracle, format_tree, leaf, parse_tree, pbt

AB = parse_tree("a(b,b)")


class TestRun:
    def test_on_leaf(self):
        assert run_mtt(exa_mtt(), leaf("b")) == parse_tree("a(b,b)")

    def test_on_ab(self):
        assert run_mtt(exa_mtt(), AB) == pbt(3)

    def test_matches_oracle(self, random_trees):
        m = exa_mtt()
        for t in random_trees:
            assert run_mtt(m, t) == exa_oracle(t)

    def test_identity(self, tiny_corpus):
        m = identity_mtt(EXA_ALPHABET)
        for t in tiny_corpus:
            assert run_mtt(m, t) == t

    def test_oi_invariant(self, tiny_corpus):
        # at every step, process leaves are exactly the outermost redexes
        m = exa_mtt()
        for t in tiny_corpus:
            gm = mtt_generic(m, t)
            ctx = mtt_step(m, gm.initial)
            assert outermost_redexes_invariant(ctx)

    def test_missing_rule_raises(self):
        partial = MttSpec(
            states=(("q", 0),),
            init_state="q",
            input_alphabet=EXA_ALPHABET,
            output_alphabet=EXA_ALPHABET,
            rules={("q", "b"): leaf("b")},
        )
        with pytest.raises(MttError):
            run_mtt(partial, AB)


class TestBlackbox:
    def test_punch_single(self):
        assert punch(AB, [(1,)]) == parse_tree("a(hole,b)", None)

    def test_punch_empty(self):
        assert punch(AB, []) == AB

    def test_punch_rejects_chains(self):
        t = parse_tree("a(a(b,b),b)")
        with pytest.raises(MttError, match="antichain"):
            punch(t, [(1,), (1, 1)])

    def test_extension_on_punched_input(self):
        # a hole in place of the second child freezes the q1 call on it
        ext = extend_blackbox(exa_mtt())
        out = run_mtt(ext, punch(AB, [(2,)]))
        assert out == Tree(Blk("q1"), (pbt(2),))
        # a hole in the first child freezes the two q0 copies instead
        out1 = run_mtt(ext, punch(AB, [(1,)]))
        blk = Tree("a", (Tree(Blk("q0")), Tree(Blk("q0"))))
        assert out1 == Tree("a", (blk, blk))

    def test_height_black_examples(self):
        assert height_black(Tree(Blk("q1"), (pbt(2),))) == 1
        assert height_black(pbt(3)) == 0

    def test_punchings_enumeration(self):
        got = list(punchings(AB, 1))
        assert len(got) == 1 + 3  # no holes, or one of three nodes

    def test_nesting_matches_hole_pattern(self):
        # height_black equals the number of holes at 1*2* addresses
        m = exa_mtt()
        for t in all_trees(EXA_ALPHABET, 8):
            for holes, record in zip(
                (h for h, _ in punchings(t, 2)),
                nesting_report(m, t, max_holes=2),
            ):
                in_pattern = sum(1 for u in holes if _is_ones_then_twos(u))
                assert record.height_black == in_pattern, (format_tree(t), holes)

    def test_single_hole_nesting_bounded(self, tiny_corpus):
        # exa is finite nesting: single-hole values stay <= 1
        m = exa_mtt()
        for t in tiny_corpus:
            for record in nesting_report(m, t, max_holes=1):
                if record.single_hole:
                    assert record.height_black <= 1

    def test_multi_hole_nesting_grows(self):
        # but not finite yield nesting: chains of holes along 1*2* stack up
        m = exa_mtt()
        ext = extend_blackbox(m)
        t = pbt(3)
        holes = [(2,), (1, 2), (1, 1)]
        out = run_mtt(ext, punch(t, holes))
        assert height_black(out) == 3


def _is_ones_then_twos(u):
    word = "".join(map(str, u))
    return word == "1" * word.count("1") + "2" * word.count("2")


class TestCompile:
    def test_matches_oracle(self):
        comp = compile_mtt_to_hennie(exa_mtt())
        for t in all_trees(EXA_ALPHABET, 10):
            assert hennie_semantics(comp, t) == exa_oracle(t)

    def test_identity_mtt_single_visits(self, tiny_corpus):
        comp = compile_mtt_to_hennie(identity_mtt(EXA_ALPHABET))
        for t in tiny_corpus:
            assert hennie_semantics(comp, t) == t
            assert check_visit_bound(comp, t, 1) is None

    def test_downward_visits_bounded_by_nesting(self):
        # Thm-style accounting: downward visits at {u} are at most the
        # blackbox height of the corresponding one-hole punching
        m = exa_mtt()
        ext = extend_blackbox(m)
        comp = compile_mtt_to_hennie(m)
        equality_seen = False
        for t in all_trees(EXA_ALPHABET, 6):
            _out, stats = run_hennie(comp, t)
            for u in t.addresses():
                bound = height_black(run_mtt(ext, punch(t, [u])))
                worst = stats.max_downward_at(frozenset([u]))
                assert worst <= bound, (format_tree(t), u)
                if worst == bound:
                    equality_seen = True
        assert equality_seen

    def test_antichain_downward_visits(self):
        m = exa_mtt()
        ext = extend_blackbox(m)
        comp = compile_mtt_to_hennie(m)
        for t in all_trees(EXA_ALPHABET, 6):
            _out, stats = run_hennie(comp, t)
            for holes, punched in punchings(t, 3):
                if not holes:
                    continue
                bound = height_black(run_mtt(ext, punched))
                assert stats.max_downward_at(frozenset(holes)) <= bound
