import pytest

from treetrans.bottomup import BottomUpAutomaton, Recognizer, Relabeler, identity_relabeler, total_automaton
from treetrans.corpus import all_trees
from treetrans.fixtures import exa_thm, identity_thm, mirror_thm
from treetrans.generic import Completed, config_paths, run_generic
from treetrans.hennie import (
    NOTHERE,
    BottomUpInit,
    Head,
    HennieMachine,
    hennie_generic,
    hennie_semantics,
    initial_memory,
)
from treetrans.transforms import (
    LookaroundMachine,
    eliminate_lookaround,
    eliminate_stays,
    inline_bottom_up_init,
    lookaround_generic,
    postfix_phase_states,
    precompose_relabeler,
    run_lookaround,
)
from treetrans.trees import EXA_ALPHABET, STAY, UP, RankedAlphabet, Tree, exa_oracle, format_tree, leaf, parse_tree


def corpus6():
    return list(all_trees(EXA_ALPHABET, 6))


def corpus8():
    return list(all_trees(EXA_ALPHABET, 8))


def stay_then_exa():
    """Initial state stays once (rewriting nothing visible) then runs exa."""
    base = exa_thm()
    rules = dict(base.rules)
    for sym in ("a", "b"):
        rules[("s", sym, "top")] = Tree(Head("q0", "top", STAY))
    return HennieMachine(
        states=("s",) + base.states,
        memory=base.memory,
        top=base.top,
        input_alphabet=EXA_ALPHABET,
        output_alphabet=EXA_ALPHABET,
        init_state="s",
        rules=rules,
        allow_stay=True,
    )


class TestEliminateStays:
    def test_semantics_preserved(self):
        plain = eliminate_stays(stay_then_exa())
        assert not plain.allow_stay
        for t in corpus8():
            assert hennie_semantics(plain, t) == exa_oracle(t)

    def test_no_stay_machine_unchanged(self):
        m = exa_thm()
        assert eliminate_stays(m) is m

    def test_stay_self_loop_removed(self):
        base = exa_thm()
        rules = dict(base.rules)
        rules[("q0", "a", "L")] = Tree(Head("q0", "L", STAY))
        looper = HennieMachine(
            base.states, base.memory, base.top, EXA_ALPHABET, EXA_ALPHABET, "q0", rules, allow_stay=True
        )
        plain = eliminate_stays(looper)
        assert ("q0", "a", "L") not in plain.rules
        # the machine is undefined on runs that would reach the loop but
        # agrees with exa everywhere else (the rule was unreachable)
        for t in corpus6():
            assert hennie_semantics(plain, t) == exa_oracle(t)

    def test_stay_into_undefined_removed(self):
        base = exa_thm()
        rules = dict(base.rules)
        rules[("q0", "a", "R")] = Tree(Head("q0", "R", STAY))  # (q0,a,R) undefined
        m = HennieMachine(
            base.states, base.memory, base.top, EXA_ALPHABET, EXA_ALPHABET, "q0", rules, allow_stay=True
        )
        assert ("q0", "a", "R") not in eliminate_stays(m).rules


def only_b_relabeler():
    """Marks each node with whether its subtree contains only b leaves."""
    marked = RankedAlphabet((("a", 2), ("b", 0), ("a_pure", 2), ("b_pure", 0)))
    auto = total_automaton(
        EXA_ALPHABET, ("pure", "mixed"), lambda sym, kids: "pure" if all(k == "pure" for k in kids) else "pure" if sym == "b" else "mixed" if "mixed" in kids else "pure"
    )
    rho = {
        ("a", "pure"): "a_pure",
        ("a", "mixed"): "a",
        ("b", "pure"): "b_pure",
        ("b", "mixed"): "b",
    }
    return Relabeler(auto, rho, EXA_ALPHABET, marked)


def bit_reader_thm():
    """Over the marked alphabet: copies, flattening marks back into a/b."""
    marked = only_b_relabeler().output_alphabet
    rules = {}
    for sym, rank in marked.symbols:
        plain = sym.split("_")[0]
        kids = tuple(Tree(Head("q", "t", i)) for i in range(1, rank + 1))
        if sym.endswith("_pure"):
            # pure subtrees are rendered as a single leaf
            rules[("q", sym, "t")] = leaf("b")
        else:
            rules[("q", sym, "t")] = Tree(plain, kids)
    return HennieMachine(("q",), ("t",), "t", marked, EXA_ALPHABET, "q", rules)


class TestPrecomposeRelabeler:
    def test_identity_relabeler(self):
        pre = precompose_relabeler(exa_thm(), identity_relabeler(EXA_ALPHABET))
        for t in corpus8():
            assert hennie_semantics(pre, t) == exa_oracle(t)

    def test_marking_relabeler(self):
        rel = only_b_relabeler()
        reader = bit_reader_thm()
        pre = precompose_relabeler(reader, rel)
        for t in corpus8():
            want = hennie_semantics(reader, rel.apply(t))
            assert hennie_semantics(pre, t) == want

    def test_first_phase_visit_counts(self):
        # the postfix phase visits each node exactly rank+1 times
        pre = precompose_relabeler(exa_thm(), identity_relabeler(EXA_ALPHABET))
        phase1 = postfix_phase_states(pre)
        for t in corpus6():
            gm = hennie_generic(pre, t)
            longest = max(config_paths(gm, 10**5), key=lambda p: len(p.configs))
            counts = {}
            for cfg in longest.configs:
                if cfg.state in phase1:
                    counts[cfg.pos] = counts.get(cfg.pos, 0) + 1
            for u in t.addresses():
                rank = len(t.node_at(u).children)
                assert counts[u] == rank + 1, (format_tree(t), u)

    def test_alphabet_mismatch_rejected(self):
        rel = only_b_relabeler()
        with pytest.raises(Exception):
            precompose_relabeler(exa_thm(), rel)  # exa reads {a,b}, rel emits marks


def trivial_initializer(m):
    auto = total_automaton(EXA_ALPHABET, ("*",), lambda s, k: "*")
    return HennieMachine(
        m.states, m.memory, m.top, m.input_alphabet, m.output_alphabet, m.init_state,
        m.rules, initializer=BottomUpInit(auto, {"*": m.top}),
    )


def leafiness_machine():
    """Memory seeded with is-leaf-or-not; first read decides the output."""
    auto = total_automaton(EXA_ALPHABET, ("leafy", "deep"), lambda s, k: "leafy" if not k else "deep")
    init = {"leafy": "L", "deep": "D"}
    rules = {}
    for sym, rank in EXA_ALPHABET.symbols:
        for mem in ("L", "D"):
            out = "b" if mem == "L" else "a"
            if rank == 0:
                rules[("q", sym, mem)] = leaf("b")
            else:
                rules[("q", sym, mem)] = Tree(
                    "a", tuple(Tree(Head("q", mem, i)) for i in range(1, rank + 1))
                )
    return HennieMachine(
        ("q",), ("L", "D"), "L", EXA_ALPHABET, EXA_ALPHABET, "q", rules,
        initializer=BottomUpInit(auto, init),
    )


class TestInlineBottomUpInit:
    def test_trivial_initializer(self):
        m = trivial_initializer(exa_thm())
        plain = inline_bottom_up_init(m)
        assert plain.initializer is None
        for t in corpus8():
            assert hennie_semantics(plain, t) == exa_oracle(t)

    def test_seeded_flags_match_direct_simulation(self):
        m = leafiness_machine()
        plain = inline_bottom_up_init(m)
        for t in corpus8():
            assert hennie_semantics(plain, t) == hennie_semantics(m, t)

    def test_visit_increase_bounded(self):
        m = trivial_initializer(exa_thm())
        plain = inline_bottom_up_init(m)
        extra = EXA_ALPHABET.max_rank + 1
        for t in corpus6():
            gm_plain = hennie_generic(plain, t)
            worst = {}
            for p in config_paths(gm_plain, 10**6):
                counts = {}
                for cfg in p.configs:
                    counts[cfg.pos] = counts.get(cfg.pos, 0) + 1
                for u, c in counts.items():
                    worst[u] = max(worst.get(u, 0), c)
            # the original machine visits each node at most twice
            assert all(c <= 2 + extra + 1 for c in worst.values())


def head_triple_lookaround():
    """Degenerate lookaround reading only the current (sym, mem, state)."""
    idt = identity_thm(EXA_ALPHABET)
    labels = [((s, "t", q), r) for s, r in EXA_ALPHABET.symbols for q in ("q", NOTHERE)]
    la_alph = RankedAlphabet(tuple(labels))
    states = ("none", ("hit", "a"), ("hit", "b"))

    def fn(label, kids):
        sym, _mem, q = label
        if q != NOTHERE:
            return ("hit", sym)
        for k in kids:
            if k != "none":
                return k
        return "none"

    auto = total_automaton(la_alph, states, fn)
    rhs = {("hit", "a"): idt.rules[("q", "a", "t")], ("hit", "b"): idt.rules[("q", "b", "t")]}
    return LookaroundMachine(
        states=("q",), memory=("t",), top="t",
        input_alphabet=EXA_ALPHABET, output_alphabet=EXA_ALPHABET, init_state="q",
        automaton=auto, rhs=rhs,
    )


def root_flag_lookaround():
    """Lookaround that checks whether the head sits at the global root."""
    out_alph = RankedAlphabet((("a", 2), ("b", 0), ("ar", 2), ("br", 0)))
    labels = [((s, "t", q), r) for s, r in EXA_ALPHABET.symbols for q in ("q", NOTHERE)]
    la_alph = RankedAlphabet(tuple(labels))
    states = ("none", ("root", "a"), ("root", "b"), ("inside", "a"), ("inside", "b"))

    def fn(label, kids):
        sym, _mem, q = label
        if q != NOTHERE:
            return ("root", sym)
        for k in kids:
            if k != "none":
                return ("inside", k[1])
        return "none"

    auto = total_automaton(la_alph, states, fn)
    rhs = {}
    for kind in ("root", "inside"):
        for sym, rank in EXA_ALPHABET.symbols:
            out = sym + "r" if kind == "root" else sym
            kids = tuple(Tree(Head("q", "t", i)) for i in range(1, rank + 1))
            rhs[(kind, sym)] = Tree(out, kids)
    return LookaroundMachine(
        states=("q",), memory=("t",), top="t",
        input_alphabet=EXA_ALPHABET, output_alphabet=out_alph, init_state="q",
        automaton=auto, rhs=rhs,
    )


def root_flag_direct():
    out_alph = RankedAlphabet((("a", 2), ("b", 0), ("ar", 2), ("br", 0)))
    rules = {}
    for sym, rank in EXA_ALPHABET.symbols:
        kids = tuple(Tree(Head("q", "t", i)) for i in range(1, rank + 1))
        rules[("q0", sym, "t")] = Tree(sym + "r", kids)
        rules[("q", sym, "t")] = Tree(sym, kids)
    return HennieMachine(("q0", "q"), ("t",), "t", EXA_ALPHABET, out_alph, "q0", rules)


def parent_memory_lookaround():
    """Leaves report the memory their parent holds when they are reached."""
    out_alph = RankedAlphabet((("c", 2), ("one", 0), ("two", 0), ("root", 0)))
    mems = ("t", "m1", "m2")
    labels = [((s, mem, q), r) for s, r in EXA_ALPHABET.symbols for mem in mems for q in ("q", NOTHERE)]
    la_alph = RankedAlphabet(tuple(labels))
    # state: none | head(sym) | done(sym, parent mem); propagate upward
    states = ["none"]
    states += [("head", s) for s, _ in EXA_ALPHABET.symbols]
    states += [("done", s, mem) for s, _ in EXA_ALPHABET.symbols for mem in mems]

    def fn(label, kids):
        sym, mem, q = label
        if q != NOTHERE:
            return ("head", sym)
        for k in kids:
            if k == "none":
                continue
            if k[0] == "head":
                return ("done", k[1], mem)
            return k
        return "none"

    auto = total_automaton(la_alph, tuple(states), fn)
    rhs = {}
    # at the root (no parent), write m1 and descend left when possible
    rhs[("head", "a")] = Tree("c", (Tree(Head("q", "m1", 1)), Tree(Head("q", "m2", 2))))
    rhs[("head", "b")] = leaf("root")
    for sym, _ in EXA_ALPHABET.symbols:
        rhs[("done", sym, "m1")] = leaf("one")
        rhs[("done", sym, "m2")] = leaf("two")
        # ("done", sym, "t") deliberately undefined
    return LookaroundMachine(
        states=("q",), memory=mems, top="t",
        input_alphabet=EXA_ALPHABET, output_alphabet=out_alph, init_state="q",
        automaton=auto, rhs=rhs,
    )


class TestEliminateLookaround:
    def test_degenerate_lookaround(self):
        lm = head_triple_lookaround()
        plain = eliminate_lookaround(lm)
        for t in corpus6():
            ref = run_lookaround(lm, t)
            assert isinstance(ref, Completed) and ref.tree == t
            assert hennie_semantics(plain, t) == t

    def test_root_flag(self):
        lm = root_flag_lookaround()
        plain = eliminate_lookaround(lm, max_la_states=6)
        direct = root_flag_direct()
        for t in corpus6():
            want = hennie_semantics(direct, t)
            assert hennie_semantics(plain, t) == want
            ref = run_lookaround(lm, t)
            assert isinstance(ref, Completed) and ref.tree == want

    def test_parent_memory_vs_reference(self):
        lm = parent_memory_lookaround()
        plain = eliminate_lookaround(lm, max_la_states=16)
        for t in corpus6():
            ref = run_lookaround(lm, t)
            want = ref.tree if isinstance(ref, Completed) else None
            assert hennie_semantics(plain, t) == want, format_tree(t)

    def test_state_cap(self):
        lm = parent_memory_lookaround()
        with pytest.raises(Exception, match="cap"):
            eliminate_lookaround(lm, max_la_states=6)
