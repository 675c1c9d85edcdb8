"""Running-example machines and small test transducers shared by the suite."""

from __future__ import annotations

from .hennie import Head, HennieMachine, identity_thm
from .mtt import Call, MttSpec, Param
from .trees import EXA_ALPHABET, UP, RankedAlphabet, Tree, alphabet

# ---------------------------------------------------------------------------
# the running example as a Hennie machine: 2 states, memory {top, L, R, X}


def exa_thm() -> HennieMachine:
    """Computes pbt(|Dom(t) ∩ 1*2*|); visits every node at most twice."""
    T, L, R, X = "top", "L", "R", "X"

    def hd(q, m, d):
        return Tree(Head(q, m, d))

    rules = {
        ("q0", "a", T): Tree("a", (hd("q1", L, 2), hd("q1", L, 2))),
        ("q0", "b", T): Tree("a", (Tree("b"), Tree("b"))),
        ("q1", "a", T): Tree("a", (hd("q1", R, 2), hd("q1", R, 2))),
        ("q1", "a", L): hd("q0", X, 1),
        ("q1", "b", T): Tree("a", (hd("q1", X, UP), hd("q1", X, UP))),
        ("q1", "a", R): hd("q1", X, UP),
    }
    return HennieMachine(
        states=("q0", "q1"),
        memory=(T, L, R, X),
        top=T,
        input_alphabet=EXA_ALPHABET,
        output_alphabet=EXA_ALPHABET,
        init_state="q0",
        rules=rules,
    )


def exa_memory_order():
    """Strict (greater, lesser) pairs: top > {L,R} > X."""
    return [("top", "L"), ("top", "R"), ("top", "X"), ("L", "X"), ("R", "X")]


def mirror_thm(alph: RankedAlphabet = EXA_ALPHABET) -> HennieMachine:
    """Copies the input with every node's children reversed."""
    rules = {}
    for sym, rank in alph.symbols:
        kids = tuple(Tree(Head("q", "t", rank - i)) for i in range(rank))
        rules[("q", sym, "t")] = Tree(sym, kids)
    return HennieMachine(
        states=("q",),
        memory=("t",),
        top="t",
        input_alphabet=alph,
        output_alphabet=alph,
        init_state="q",
        rules=rules,
    )


def mirror_tree(t: Tree) -> Tree:
    return Tree(t.label, tuple(mirror_tree(c) for c in reversed(t.children)))


SPINE_ALPHABET = alphabet({"S": 1, "E": 0})


def left_spine_thm(alph: RankedAlphabet = EXA_ALPHABET) -> HennieMachine:
    """Unary string tracing the leftmost branch; narrow-visit by construction."""
    return _spine_thm(alph, leftmost=True)


def right_spine_thm(alph: RankedAlphabet = EXA_ALPHABET) -> HennieMachine:
    return _spine_thm(alph, leftmost=False)


def _spine_thm(alph: RankedAlphabet, leftmost: bool) -> HennieMachine:
    rules = {}
    for sym, rank in alph.symbols:
        if rank == 0:
            rules[("q", sym, "t")] = Tree("E")
        else:
            child = 1 if leftmost else rank
            rules[("q", sym, "t")] = Tree("S", (Tree(Head("q", "t", child)),))
    return HennieMachine(
        states=("q",),
        memory=("t",),
        top="t",
        input_alphabet=alph,
        output_alphabet=SPINE_ALPHABET,
        init_state="q",
        rules=rules,
    )


def spine_oracle(t: Tree, leftmost: bool = True) -> Tree:
    out = Tree("E")
    depth = 0
    cur = t
    while cur.children:
        depth += 1
        cur = cur.children[0] if leftmost else cur.children[-1]
    for _ in range(depth):
        out = Tree("S", (out,))
    return out


def root_relabel_thm(alph: RankedAlphabet = EXA_ALPHABET, suffix: str = "r") -> HennieMachine:
    """Copies the input but renames the root label (sym -> sym + suffix)."""
    out_alph = alph.extend([(sym + suffix, rank) for sym, rank in alph.symbols])
    rules = {}
    for sym, rank in alph.symbols:
        kids = tuple(Tree(Head("q", "t", i)) for i in range(1, rank + 1))
        rules[("q0", sym, "t")] = Tree(sym + suffix, kids)
        rules[("q", sym, "t")] = Tree(sym, kids)
    return HennieMachine(
        states=("q0", "q"),
        memory=("t",),
        top="t",
        input_alphabet=alph,
        output_alphabet=out_alph,
        init_state="q0",
        rules=rules,
    )


def root_relabel_oracle(t: Tree, suffix: str = "r") -> Tree:
    return Tree(t.label + suffix, t.children)


# ---------------------------------------------------------------------------
# the running example as an MTT


def exa_mtt() -> MttSpec:
    """States q0 (rank 0) and q1 (rank 1), mirroring the Hennie machine."""
    rules = {
        ("q0", "a"): Tree(
            Call("q1", 2),
            (Tree("a", (Tree(Call("q0", 1)), Tree(Call("q0", 1)))),),
        ),
        ("q0", "b"): Tree("a", (Tree("b"), Tree("b"))),
        ("q1", "a"): Tree(
            Call("q1", 2),
            (Tree("a", (Tree(Param(1)), Tree(Param(1)))),),
        ),
        ("q1", "b"): Tree("a", (Tree(Param(1)), Tree(Param(1)))),
    }
    return MttSpec(
        states=(("q0", 0), ("q1", 1)),
        init_state="q0",
        input_alphabet=EXA_ALPHABET,
        output_alphabet=EXA_ALPHABET,
        rules=rules,
    )


def identity_mtt(alph: RankedAlphabet = EXA_ALPHABET) -> MttSpec:
    rules = {}
    for sym, rank in alph.symbols:
        kids = tuple(Tree(Call("q", i)) for i in range(1, rank + 1))
        rules[("q", sym)] = Tree(sym, kids)
    return MttSpec(
        states=(("q", 0),),
        init_state="q",
        input_alphabet=alph,
        output_alphabet=alph,
        rules=rules,
    )


# ---------------------------------------------------------------------------
# actor fixtures


def _relay_transducer(alph: RankedAlphabet, child_for) -> "ActorTransducer":
    """Transition actors that emit their letter and delegate branch i to
    input child child_for(rank, i); identity and mirror are instances."""
    from .actors import Actor, ActorTransducer, Emit, Lolli, O, Send, lolli_chain

    def arg_port(i):
        return ("R",) * (i - 1) + ("L",)

    transition = {}
    for sym, rank in alph.symbols:
        typ = lolli_chain([O] * rank, O)
        active = ("go",) + tuple(f"s{i}" for i in range(1, rank + 1))
        d_minus = {("p0", ("R",) * rank): "go"}
        d_plus = {"go": Emit(sym, tuple(f"s{i}" for i in range(1, rank + 1)))}
        for i in range(1, rank + 1):
            d_plus[f"s{i}"] = Send("dead", arg_port(child_for(rank, i)))
        transition[sym] = Actor(
            type=typ,
            passive=("p0", "dead"),
            p_init="p0",
            active=active,
            d_minus=d_minus,
            d_plus=d_plus,
            output_alphabet=alph,
        )
    out = Actor(
        type=Lolli(O, O),
        passive=("p0", "dead"),
        p_init="p0",
        active=("a0",),
        d_minus={("p0", ("R",)): "a0"},
        d_plus={"a0": Send("dead", ("L",))},
        output_alphabet=alph,
    )
    return ActorTransducer(
        type=O,
        input_alphabet=alph,
        output_alphabet=alph,
        transition=transition,
        out=out,
    )


def identity_actor_transducer(alph: RankedAlphabet = EXA_ALPHABET):
    return _relay_transducer(alph, lambda rank, i: i)


def mirror_actor_transducer(alph: RankedAlphabet = EXA_ALPHABET):
    return _relay_transducer(alph, lambda rank, i: rank + 1 - i)


def diagonal_actor(alph: RankedAlphabet = EXA_ALPHABET):
    """Relay of type o -o (o & o); its message flow cycles through d_minus."""
    from .actors import Actor, Lolli, O, Send, With

    d_minus = {}
    d_plus = {}
    for x in ("pL", "pR"):
        for y, tag in (("pL", "L"), ("pR", "R")):
            d_minus[(x, ("R", tag))] = f"a{tag}"
    d_plus["aL"] = Send("pL", ("L",))
    d_plus["aR"] = Send("pR", ("L",))
    return Actor(
        type=Lolli(O, With(O, O)),
        passive=("pL", "pR"),
        p_init="pL",
        active=("aL", "aR"),
        d_minus=d_minus,
        d_plus=d_plus,
        output_alphabet=alph,
    )


def tree_actor(t: Tree, alph: RankedAlphabet = EXA_ALPHABET):
    """Single-passive-state actor of type o generating the fixed tree t."""
    from .actors import Actor, Emit, O

    addrs = list(t.addresses())
    d_plus = {}
    for u in addrs:
        sub = t.node_at(u)
        d_plus[("n",) + u] = Emit(sub.label, tuple(("n",) + u + (i,) for i in range(1, len(sub.children) + 1)))
    return Actor(
        type=O,
        passive=("p",),
        p_init="p",
        active=tuple(d_plus),
        d_minus={("p", ()): ("n",)},
        d_plus=d_plus,
        output_alphabet=alph,
    )


__all__ = [
    "exa_thm",
    "exa_memory_order",
    "exa_mtt",
    "identity_mtt",
    "identity_thm",
    "mirror_thm",
    "mirror_tree",
    "left_spine_thm",
    "right_spine_thm",
    "spine_oracle",
    "root_relabel_thm",
    "root_relabel_oracle",
    "identity_actor_transducer",
    "mirror_actor_transducer",
    "diagonal_actor",
    "tree_actor",
    "SPINE_ALPHABET",
]
