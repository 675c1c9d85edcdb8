import pytest

from treetrans.fixtures import exa_thm
from treetrans.hennie import Head, HennieMachine, hennie_semantics, identity_thm
from treetrans.profiles import (
    ExecutionOrder,
    Incoherent,
    ProfileError,
    Truncated,
    VisitPair,
    check_coherence,
    coherent_global_profiles,
    decode_profile,
    enumerate_local_profiles,
    full_branches,
    is_profile_extension,
    prefix_branches,
    profile_of_output_node,
)
from treetrans.trees import EXA_ALPHABET, Tree, format_tree, leaf, parse_tree

AB = parse_tree("a(b,b)")


class TestLocalProfiles:
    def test_exa_on_b_contains_single_truncation(self):
        profs = enumerate_local_profiles(exa_thm(), "b", 2)
        root_trunc = [
            p
            for p in profs
            if len(p) == 1 and p[0].state == "q0" and isinstance(p[0].branch.end, Truncated)
        ]
        assert root_trunc, "missing the truncated-at-root profile"

    def test_unvisited_profile_present(self):
        assert () in enumerate_local_profiles(exa_thm(), "b", 2)

    def test_memory_threading(self):
        # a second visit under q1 can only read the memory the first wrote
        for prof in enumerate_local_profiles(exa_thm(), "a", 2):
            if len(prof) == 2:
                first = prof[0]
                assert first.branch.head is not None

    def test_machine_with_no_rules(self):
        m = HennieMachine(("q",), ("t",), "t", EXA_ALPHABET, EXA_ALPHABET, "q", {})
        assert enumerate_local_profiles(m, "b", 2) == {()}

    def test_two_enumerators_agree(self):
        # reference: filter all pair sequences instead of threading on the fly
        m = exa_thm()
        for sym in ("a", "b"):
            fast = enumerate_local_profiles(m, sym, 2)
            slow = _bruteforce_local_profiles(m, sym, 2)
            assert fast == slow


def _bruteforce_local_profiles(m, sym, bound):
    pairs = []
    for q in m.states:
        for mem in m.memory:
            rhs = m.rule(q, sym, mem)
            if rhs is None:
                continue
            for br in prefix_branches(rhs):
                pairs.append((q, mem, br))
    out = {()}
    from itertools import product

    for k in range(1, bound + 1):
        for combo in product(pairs, repeat=k):
            mem = m.top
            ok = True
            for i, (q, read, br) in enumerate(combo):
                if read != mem:
                    ok = False
                    break
                if i < k - 1:
                    if br.head is None:
                        ok = False
                        break
                    mem = br.head.mem
            if ok:
                out.add(tuple(VisitPair(q, br) for q, _read, br in combo))
    return out


class TestCoherence:
    def test_extracted_profile_is_coherent(self):
        m = exa_thm()
        out = hennie_semantics(m, AB)
        for u in out.addresses():
            g = profile_of_output_node(m, AB, u)
            assert isinstance(check_coherence(m, AB, g), ExecutionOrder)

    def test_dangling_pair_incoherent(self):
        m = exa_thm()
        g = profile_of_output_node(m, AB, ())
        extra = dict(g)
        spare = [p for p in enumerate_local_profiles(m, "b", 2) if len(p) == 1]
        extra[(1,)] = extra[(1,)] + spare[0]
        verdict = check_coherence(m, AB, extra)
        assert isinstance(verdict, Incoherent)

    def test_unique_non_head_endpoint(self):
        m = exa_thm()
        for g in coherent_global_profiles(m, AB, 2):
            endpoints = [
                pair
                for prof in g.values()
                for pair in prof
                if pair.branch.head is None
            ]
            assert len(endpoints) == 1

    def test_wrong_initial_state_incoherent(self):
        m = exa_thm()
        prof_b = [p for p in enumerate_local_profiles(m, "b", 2) if p and p[0].state == "q1"]
        g = {(): prof_b[0]}
        assert isinstance(check_coherence(m, leaf("b"), g), Incoherent)


class TestBijection:
    @pytest.mark.parametrize("text", ["b", "a(b,b)"])
    def test_count_matches_output_nodes(self, text):
        m = exa_thm()
        t = parse_tree(text)
        out = hennie_semantics(m, t)
        count = sum(1 for _ in coherent_global_profiles(m, t, 2))
        assert count == out.size

    def test_round_trip_all_nodes(self):
        m = exa_thm()
        for text in ("b", "a(b,b)"):
            t = parse_tree(text)
            out = hennie_semantics(m, t)
            for u in out.addresses():
                g = profile_of_output_node(m, t, u)
                lbl, word = decode_profile(m, t, g)
                assert lbl == out.node_at(u).label
                assert tuple(i for _, i in word) == u

    def test_extension_property(self):
        m = exa_thm()
        for text in ("b", "a(b,b)", "a(b,a(b,b))"):
            t = parse_tree(text)
            out = hennie_semantics(m, t)
            profs = {u: profile_of_output_node(m, t, u) for u in out.addresses()}
            for u in out.addresses():
                if u:
                    assert is_profile_extension(profs[u[:-1]], profs[u], t)

    def test_identity_machine_bijection(self):
        m = identity_thm(EXA_ALPHABET)
        for text in ("b", "a(b,b)"):
            t = parse_tree(text)
            count = sum(1 for _ in coherent_global_profiles(m, t, 1))
            assert count == t.size
