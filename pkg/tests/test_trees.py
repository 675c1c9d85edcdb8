import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treetrans.corpus import all_trees, random_corpus
from treetrans.trees import (
    EXA_ALPHABET,
    AddressError,
    BranchWord,
    RankedAlphabet,
    Tree,
    TreeParseError,
    alphabet,
    branch_words,
    exa_oracle,
    format_tree,
    leaf,
    node,
    ones_then_twos_count,
    parse_alphabet,
    parse_tree,
    pbt,
    simultaneous_substitute,
    substitute,
    subtree_at,
)

AB = parse_tree("a(b,b)")


class TestCodec:
    def test_parse_simple(self):
        assert parse_tree("a(b,b)", EXA_ALPHABET) == node("a", leaf("b"), leaf("b"))

    def test_parse_leaf(self):
        assert parse_tree("b", EXA_ALPHABET) == leaf("b")

    def test_arity_mismatch(self):
        with pytest.raises(TreeParseError, match="arity"):
            parse_tree("a(b)", EXA_ALPHABET)

    def test_unknown_symbol(self):
        with pytest.raises(TreeParseError, match="unknown"):
            parse_tree("c", EXA_ALPHABET)

    def test_error_position(self):
        with pytest.raises(TreeParseError) as e:
            parse_tree("a(b,,b)", EXA_ALPHABET)
        assert e.value.position == 4

    def test_whitespace_insignificant(self):
        assert parse_tree(" a ( b , b ) ", EXA_ALPHABET) == AB

    def test_round_trip_corpus(self):
        for t in all_trees(EXA_ALPHABET, 9):
            assert parse_tree(format_tree(t), EXA_ALPHABET) == t

    def test_alphabet_file(self):
        alph = parse_alphabet("a : 2\nb : 0\n# comment\n")
        assert alph == EXA_ALPHABET


class TestAddressing:
    def test_subtree_at_child(self):
        assert subtree_at(AB, (2,)) == leaf("b")

    def test_subtree_at_root(self):
        assert subtree_at(AB, ()) == AB

    def test_subtree_nested(self):
        t = parse_tree("a(a(b,b),b)")
        assert subtree_at(t, (1,)) == AB

    def test_out_of_domain(self):
        with pytest.raises(AddressError):
            subtree_at(AB, (3,))

    def test_substitute(self):
        assert substitute(AB, (1,), AB) == parse_tree("a(a(b,b),b)")

    def test_substitute_root(self):
        assert substitute(leaf("b"), (), AB) == AB

    def test_simultaneous(self):
        got = simultaneous_substitute(AB, {"b": leaf("c")})
        assert got == node("a", leaf("c"), leaf("c"))


class TestBranchWords:
    def test_single_leaf(self):
        assert branch_words(leaf("b")) == {BranchWord((), "b")}

    def test_two_branches(self):
        assert branch_words(AB) == {
            BranchWord((("a", 1),), "b"),
            BranchWord((("a", 2),), "b"),
        }

    def test_pbt3_leaf_count(self):
        assert len(branch_words(pbt(3))) == 8

    def test_size_preserving_bijection(self):
        for t in all_trees(EXA_ALPHABET, 9):
            words = branch_words(t)
            leaves = [u for u in t.addresses() if not subtree_at(t, u).children]
            assert {w.address() for w in words} == set(leaves)

    def test_injective_across_distinct_trees(self):
        seen = {}
        for t in all_trees(EXA_ALPHABET, 12):
            key = hash(branch_words(t))
            assert key not in seen or seen[key] == t
            seen[key] = t

    def test_injective_second_alphabet(self):
        alph = alphabet({"f": 2, "g": 1, "x": 0, "y": 0})
        seen = {}
        for t in all_trees(alph, 6):
            key = branch_words(t)
            assert key not in seen
            seen[key] = t


class TestRunningExample:
    def test_pbt_zero(self):
        assert pbt(0) == leaf("b")

    def test_pbt_recursion(self):
        assert pbt(2) == node("a", pbt(1), pbt(1))

    def test_exa_on_ab(self):
        assert exa_oracle(AB) == pbt(3)

    def test_exa_counts_hand_checked(self):
        # Dom(a(b,a(b,b))) cap 1*2* = {e, 1, 2, 22}
        t = parse_tree("a(b,a(b,b))")
        assert ones_then_twos_count(t) == 4
        assert exa_oracle(t) == pbt(4)

    def test_height_bound(self):
        for t in all_trees(EXA_ALPHABET, 9):
            assert exa_oracle(t).height <= t.size

    def test_word_count_formula(self):
        # words 1^i 2^j with i+j <= n, counted by enumeration
        for n in range(21):
            count = sum(1 for i in range(n + 1) for j in range(n + 1 - i))
            assert count == (n + 1) * (n + 2) // 2

    def test_exa_on_pbt_is_the_word_count(self):
        for h in range(5):
            assert ones_then_twos_count(pbt(h)) == (h + 1) * (h + 2) // 2

    def test_wrong_alphabet_rejected(self):
        with pytest.raises(Exception):
            exa_oracle(leaf("c"))


@st.composite
def exa_trees(draw):
    seed = draw(st.integers(0, 10**6))
    size = draw(st.integers(1, 12))
    return random_corpus(EXA_ALPHABET, size, 1, seed)[0]


class TestProperties:
    @given(exa_trees())
    @settings(max_examples=60, deadline=None)
    def test_codec_round_trip(self, t):
        assert parse_tree(format_tree(t), EXA_ALPHABET) == t

    @given(exa_trees())
    @settings(max_examples=60, deadline=None)
    def test_branch_word_count_is_leaf_count(self, t):
        leaves = sum(1 for u in t.addresses() if not subtree_at(t, u).children)
        assert len(branch_words(t)) == leaves

    @given(exa_trees(), exa_trees())
    @settings(max_examples=60, deadline=None)
    def test_substitute_then_subtree(self, t, r):
        for u in t.addresses():
            assert subtree_at(substitute(t, u, r), u) == r
            break
