"""Macro tree transducers: outside-in semantics, hole extension, THM compiler.

Right-hand sides are trees over the output alphabet extended with Call and
Param labels: Call(q, i) stands for a state call on the i-th input child
(its children are the call's accumulating parameters), Param(j) for the
j-th parameter of the rule's own state.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Any, Iterator, Mapping, Optional

from .generic import Completed, GenericMachine, MachineStuck, Proc, run_generic
from .hennie import Head, HennieMachine
from .trees import (
    UP,
    Address,
    RankedAlphabet,
    Tree,
    is_antichain,
    subtree_at,
    substitute,
    validate_tree,
)
from .util import TreetransError

HOLE = "hole"


class MttError(TreetransError):
    pass


@dataclass(frozen=True)
class Call:
    """State call on an input child: label of rank rank(state)."""

    state: str
    child: int


@dataclass(frozen=True)
class Param:
    """Parameter leaf y_j (1-based)."""

    index: int


@dataclass(frozen=True)
class Blk:
    """Frozen call marker in outputs of the hole extension."""

    state: str


@dataclass(frozen=True)
class MttSpec:
    states: tuple[tuple[str, int], ...]  # (name, rank), initial first or named below
    init_state: str
    input_alphabet: RankedAlphabet
    output_alphabet: RankedAlphabet
    rules: Mapping  # (state, sym) -> RHS tree

    def state_rank(self, q: str) -> int:
        for name, rank in self.states:
            if name == q:
                return rank
        raise MttError(f"unknown state {q!r}")

    @property
    def max_state_rank(self) -> int:
        return max((r for _, r in self.states), default=0)

    def rule(self, q: str, sym: str) -> Optional[Tree]:
        return self.rules.get((q, sym))

    def validate(self) -> None:
        if self.state_rank(self.init_state) != 0:
            raise MttError("the initial state must have rank 0")
        for (q, sym), rhs in self.rules.items():
            self._check_rhs(rhs, self.input_alphabet.rank(sym), self.state_rank(q))

    def _check_rhs(self, rhs: Tree, in_rank: int, own_rank: int) -> None:
        lbl = rhs.label
        if isinstance(lbl, Call):
            if not 1 <= lbl.child <= in_rank:
                raise MttError(f"call variable x{lbl.child} out of range")
            if len(rhs.children) != self.state_rank(lbl.state):
                raise MttError(f"call {lbl!r} has wrong parameter count")
        elif isinstance(lbl, Param):
            if not 1 <= lbl.index <= own_rank:
                raise MttError(f"parameter y{lbl.index} out of range")
            if rhs.children:
                raise MttError("parameters are leaves")
        elif isinstance(lbl, Blk):
            pass
        else:
            if self.output_alphabet.rank(lbl) != len(rhs.children):
                raise MttError(f"output symbol {lbl!r} with wrong arity")
        for c in rhs.children:
            self._check_rhs(c, in_rank, own_rank)


@dataclass(frozen=True)
class Redex:
    """A pending state call: state, input subtree, parameter arguments.

    Arguments are output trees whose leaves may be Proc-wrapped redexes
    (inner calls frozen until this one fires — the outside-in discipline).
    """

    state: str
    subtree: Tree
    args: tuple[Tree, ...]


def _instantiate(m: MttSpec, rhs: Tree, input_children: tuple[Tree, ...], args: tuple[Tree, ...]) -> Tree:
    """RHS with parameters replaced by args and calls turned into redex leaves."""
    lbl = rhs.label
    if isinstance(lbl, Param):
        return args[lbl.index - 1]
    if isinstance(lbl, Call):
        new_args = tuple(_instantiate(m, c, input_children, args) for c in rhs.children)
        return Tree(Proc(Redex(lbl.state, input_children[lbl.child - 1], new_args)))
    return Tree(lbl, tuple(_instantiate(m, c, input_children, args) for c in rhs.children))


def mtt_step(m: MttSpec, r: Redex) -> Tree:
    sym = r.subtree.label
    rhs = m.rule(r.state, sym)
    if rhs is None:
        raise MachineStuck(r, f"no rule for ({r.state!r}, {sym!r})")
    return _instantiate(m, rhs, r.subtree.children, r.args)


def mtt_generic(m: MttSpec, t: Tree) -> GenericMachine:
    return GenericMachine(
        initial=Redex(m.init_state, t, ()),
        step=lambda r: mtt_step(m, r),
    )


def run_mtt(m: MttSpec, t: Tree, fuel: int = 10**6) -> Tree:
    result = run_generic(mtt_generic(m, t), fuel)
    if isinstance(result, Completed):
        return result.tree
    raise MttError(f"MTT run did not complete: {type(result).__name__}")


def outermost_redexes_invariant(ctx: Tree) -> bool:
    """Process leaves of a global state carry redexes; no call labels remain."""
    if isinstance(ctx.label, (Call, Param)):
        return False
    if isinstance(ctx.label, Proc):
        return not ctx.children
    return all(outermost_redexes_invariant(c) for c in ctx.children)


# ---------------------------------------------------------------------------
# hole extension


def extend_blackbox(m: MttSpec) -> MttSpec:
    """Adds an input hole and rules freezing calls on it as Blk output nodes."""
    in2 = m.input_alphabet.extend([(HOLE, 0)])
    out2 = m.output_alphabet.extend([(Blk(q), r) for q, r in m.states])
    rules = dict(m.rules)
    for q, rank in m.states:
        rules[(q, HOLE)] = Tree(Blk(q), tuple(Tree(Param(j)) for j in range(1, rank + 1)))
    return MttSpec(m.states, m.init_state, in2, out2, rules)


def punch(t: Tree, holes) -> Tree:
    """Replace each subtree rooted in the antichain `holes` by the hole leaf."""
    holes = sorted(set(holes))
    if not is_antichain(holes):
        raise MttError("hole set must be an antichain")
    out = t
    for u in holes:
        out = substitute(out, u, Tree(HOLE))
    return out


def punchings(t: Tree, max_holes: int) -> Iterator[tuple[tuple[Address, ...], Tree]]:
    """All hole antichains of size <= max_holes (including none) with punchings."""
    addrs = list(t.addresses())
    for k in range(0, max_holes + 1):
        for combo in combinations(addrs, k):
            if is_antichain(combo):
                yield combo, punch(t, combo)


def height_black(t: Tree) -> int:
    """Maximum number of frozen-call nodes on one branch."""
    own = 1 if isinstance(t.label, Blk) else 0
    return own + max((height_black(c) for c in t.children), default=0)


@dataclass(frozen=True)
class NestingRecord:
    holes: tuple
    single_hole: bool
    height_black: int


def nesting_report(m: MttSpec, t: Tree, max_holes: int, fuel: int = 10**6) -> list[NestingRecord]:
    ext = extend_blackbox(m)
    out = []
    for holes, punched in punchings(t, max_holes):
        hb = height_black(run_mtt(ext, punched, fuel))
        out.append(NestingRecord(holes, len(holes) == 1, hb))
    return out


# ---------------------------------------------------------------------------
# MTT -> Hennie machine

MTT_TOP = "__mtt_top"


def _truncate_to_rhs(ctx: Tree) -> Tree:
    """Emit the output prefix; truncate each branch at its first non-output node.

    A call-rooted subtree becomes a head descending into the called child
    with the whole pending subtree written to memory; a parameter leaf
    becomes an upward head remembering which parameter branch to resume.
    """
    lbl = ctx.label
    if isinstance(lbl, Call):
        return Tree(Head(lbl.state, ctx, lbl.child))
    if isinstance(lbl, Param):
        return Tree(Head(lbl.index, MTT_TOP, UP))
    return Tree(lbl, tuple(_truncate_to_rhs(c) for c in ctx.children))


def _call_subtrees(rhs: Tree) -> Iterator[Tree]:
    if isinstance(rhs.label, Call):
        yield rhs
    for c in rhs.children:
        yield from _call_subtrees(c)


def compile_mtt_to_hennie(m: MttSpec) -> HennieMachine:
    """One-pass-per-branch simulation with the pending-call stack in memory.

    Each node stores at most one pending call subtree (the sequence of
    remaining calls for the branch being produced); numeric states resume
    production of the corresponding parameter branch when moving back up.
    """
    m.validate()
    out_prime = []
    for rhs in m.rules.values():
        for sub in _call_subtrees(rhs):
            if sub not in out_prime:
                out_prime.append(sub)
    memory = (MTT_TOP,) + tuple(out_prime)
    states = tuple(q for q, _ in m.states) + tuple(range(1, m.max_state_rank + 1))
    rules: dict = {}
    for (q, sym), rhs in m.rules.items():
        rules[(q, sym, MTT_TOP)] = _truncate_to_rhs(rhs)
    for pending in out_prime:
        for j in range(1, len(pending.children) + 1):
            arg = pending.children[j - 1]
            for sym, _rank in m.input_alphabet.symbols:
                rules[(j, sym, pending)] = _truncate_to_rhs(arg)
    return HennieMachine(
        states=states,
        memory=memory,
        top=MTT_TOP,
        input_alphabet=m.input_alphabet,
        output_alphabet=m.output_alphabet,
        init_state=m.init_state,
        rules=rules,
    )
