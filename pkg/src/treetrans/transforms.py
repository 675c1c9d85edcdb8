"""Conservative extensions of Hennie machines and their eliminations.

Covers: stay-instruction elimination by rule inlining, precomposition by a
bottom-up relabeler (two-mode postfix construction), bottom-up memory
initialization, and regular lookaround elimination via dynamically
maintained neighborhood summaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Any, Mapping, Optional

from .bottomup import BottomUpAutomaton, LazyDelta, Relabeler
from .generic import GenericMachine, MachineStuck
from .hennie import (
    NOTHERE,
    BottomUpInit,
    Head,
    HennieConfig,
    HennieError,
    HennieMachine,
    UndefinedTransition,
    encode_configuration,
    initial_config,
    initial_memory,
)
from .trees import STAY, UP, RankedAlphabet, Tree, label_at, neighbor
from .util import FrozenDict, LazyRules


# ---------------------------------------------------------------------------
# stay elimination


def eliminate_stays(m: HennieMachine) -> HennieMachine:
    """Inline stay leaves until none remain; rules reaching a stay loop are dropped.

    A stay loop (or a stay into an undefined transition) makes every run
    through the rule diverge or die, so the machine is undefined there
    either way and dropping the rule preserves the semantics.
    """
    if not m.allow_stay:
        return m

    def expand(rhs: Tree, sym, seen: frozenset) -> Optional[Tree]:
        if isinstance(rhs.label, Head):
            h = rhs.label
            if h.dir != STAY:
                return rhs
            key = (h.state, h.mem)
            if key in seen:
                return None  # stay loop
            inner = m.rule(h.state, sym, h.mem)
            if inner is None:
                return None  # stays into an undefined transition
            return expand(inner, sym, seen | {key})
        kids = []
        for c in rhs.children:
            done = expand(c, sym, seen)
            if done is None:
                return None
            kids.append(done)
        return Tree(rhs.label, tuple(kids))

    rules = {}
    for (state, sym, mem), rhs in m.rules.items():
        done = expand(rhs, sym, frozenset([(state, mem)]))
        if done is not None:
            rules[(state, sym, mem)] = done
    return HennieMachine(
        states=m.states,
        memory=m.memory,
        top=m.top,
        input_alphabet=m.input_alphabet,
        output_alphabet=m.output_alphabet,
        init_state=m.init_state,
        rules=rules,
        allow_stay=False,
        initializer=m.initializer,
    )


# ---------------------------------------------------------------------------
# precomposition by a bottom-up relabeler


@dataclass(frozen=True)
class PfDown:
    """Postfix mode, descending to the next unprocessed child."""


@dataclass(frozen=True)
class PfUp:
    """Postfix mode, returning to the parent with its subtree's automaton state."""

    state: Any


@dataclass(frozen=True)
class Sim:
    """Simulation mode, wrapping a state of the outer machine."""

    state: Any


@dataclass(frozen=True)
class PfSeq:
    """Postfix memory: automaton states of the children processed so far."""

    states: tuple
    at_root: bool


@dataclass(frozen=True)
class SimMem:
    """Relabeled memory: outer-machine memory plus the node's new letter."""

    mem: Any
    letter: Any
    at_root: bool


PF_TOP = "__pf_top"
PF_START = "__pf_start"


def precompose_relabeler(h: HennieMachine, r: Relabeler) -> HennieMachine:
    """Machine computing (semantics of h) composed after (semantics of r).

    Phase one reads the input postfix, recording each node's relabeled
    letter in memory (rank+1 visits per node); phase two simulates h,
    taking letters from memory.  The root is flagged in memory by the very
    first transition so phase one knows where to hand over to phase two.
    """
    if h.initializer is not None:
        raise HennieError("inline the initializer of the outer machine first")
    for sym, rank in r.output_alphabet.symbols:
        if sym not in h.input_alphabet or h.input_alphabet.rank(sym) != rank:
            raise HennieError(f"relabeler output {sym!r} does not match h's input alphabet")
    sigma = r.input_alphabet
    auto = r.automaton

    states = (
        (PF_START, PfDown())
        + tuple(PfUp(p) for p in auto.states)
        + tuple(Sim(q) for q in h.states)
    )
    memory = [PF_TOP]
    for at_root in (False, True):
        for k in range(max(sigma.max_rank, 1)):
            memory.extend(PfSeq(combo, at_root) for combo in product(auto.states, repeat=k))
        memory.extend(
            SimMem(mem, xi, at_root)
            for mem in h.memory
            for xi, _ in r.output_alphabet.symbols
        )
    memory = tuple(dict.fromkeys(memory))

    rules: dict = {}

    def finish(sym, p, at_root: bool) -> Tree:
        # last postfix visit: fix the node's letter, then leave or hand over
        xi = r.rho[(sym, p)]
        new_mem = SimMem(h.top, xi, at_root)
        if at_root:
            return Tree(Head(Sim(h.init_state), new_mem, STAY))
        return Tree(Head(PfUp(p), new_mem, UP))

    for sym, rank in sigma.symbols:
        for entry_state, at_root in ((PF_START, True), (PfDown(), False)):
            if rank == 0:
                rules[(entry_state, sym, PF_TOP)] = finish(sym, auto.step(sym, ()), at_root)
            else:
                rules[(entry_state, sym, PF_TOP)] = Tree(
                    Head(PfDown(), PfSeq((), at_root), 1)
                )
        for at_root in (False, True):
            for k in range(rank):
                for combo in product(auto.states, repeat=k):
                    for p_child in auto.states:
                        key = (PfUp(p_child), sym, PfSeq(combo, at_root))
                        seq = combo + (p_child,)
                        if k + 1 == rank:
                            rules[key] = finish(sym, auto.step(sym, seq), at_root)
                        else:
                            rules[key] = Tree(Head(PfDown(), PfSeq(seq, at_root), k + 2))

    for xi, xrank in r.output_alphabet.symbols:
        for sym, srank in sigma.symbols:
            if srank != xrank:
                continue
            for q in h.states:
                for mem in h.memory:
                    inner = h.rule(q, xi, mem)
                    if inner is None:
                        continue
                    for at_root in (False, True):
                        mapped = _map_sim(inner, xi, at_root)
                        if mapped is not None:
                            rules[(Sim(q), sym, SimMem(mem, xi, at_root))] = mapped

    return HennieMachine(
        states=states,
        memory=memory,
        top=PF_TOP,
        input_alphabet=sigma,
        output_alphabet=h.output_alphabet,
        init_state=PF_START,
        rules=rules,
        allow_stay=True,
        initializer=None,
    )


def _map_sim(rhs: Tree, xi, at_root: bool) -> Optional[Tree]:
    """Rewrap heads for simulation mode; None when h would exit its root."""
    if isinstance(rhs.label, Head):
        hd = rhs.label
        if hd.dir == UP and at_root:
            return None
        return Tree(Head(Sim(hd.state), SimMem(hd.mem, xi, at_root), hd.dir))
    kids = []
    for c in rhs.children:
        done = _map_sim(c, xi, at_root)
        if done is None:
            return None
        kids.append(done)
    return Tree(rhs.label, tuple(kids))


def postfix_phase_states(m: HennieMachine) -> frozenset:
    """The first-phase states of a machine built by precompose_relabeler."""
    return frozenset(
        s for s in m.states if s == PF_START or isinstance(s, (PfDown, PfUp))
    )


# ---------------------------------------------------------------------------
# bottom-up initialization


@dataclass(frozen=True)
class Fresh:
    """Reader-machine memory marker: node not written yet, read the letter."""


def init_relabeler(m: HennieMachine) -> Relabeler:
    """Relabeler pairing each letter with the initializer's memory value."""
    ini = m.initializer
    sigma = m.input_alphabet
    pairs = RankedAlphabet(
        tuple(((sym, mem), rank) for sym, rank in sigma.symbols for mem in _init_range(m))
    )
    rho = {
        (sym, p): (sym, ini.init[p])
        for sym, _rank in sigma.symbols
        for p in ini.automaton.states
    }
    return Relabeler(ini.automaton, rho, sigma, pairs)


def _init_range(m: HennieMachine) -> tuple:
    seen = dict.fromkeys(m.initializer.init[p] for p in m.initializer.automaton.states)
    return tuple(seen)


def reader_machine(m: HennieMachine, pairs: RankedAlphabet) -> HennieMachine:
    """Simulates m over (letter, initial-memory) pairs, reading seeds lazily."""
    fresh = Fresh()
    rules = {}
    for (sym, m0), rank in pairs.symbols:
        for q in m.states:
            rhs = m.rule(q, sym, m0)
            if rhs is not None:
                rules[(q, (sym, m0), fresh)] = rhs
            for mem in m.memory:
                rhs2 = m.rule(q, sym, mem)
                if rhs2 is not None:
                    rules[(q, (sym, m0), mem)] = rhs2
    return HennieMachine(
        states=m.states,
        memory=(fresh,) + tuple(m.memory),
        top=fresh,
        input_alphabet=pairs,
        output_alphabet=m.output_alphabet,
        init_state=m.init_state,
        rules=rules,
        allow_stay=m.allow_stay,
    )


def inline_bottom_up_init(m: HennieMachine) -> HennieMachine:
    """Plain machine equivalent to a machine with bottom-up initialization."""
    if m.initializer is None:
        return m
    rel = init_relabeler(m)
    reader = reader_machine(m, rel.output_alphabet)
    return precompose_relabeler(reader, rel)


# ---------------------------------------------------------------------------
# regular lookaround


@dataclass(frozen=True)
class LookaroundMachine:
    """Hennie machine whose transition is a recognizable function of the
    whole encoded configuration (input letters, memory values, head)."""

    states: tuple
    memory: tuple
    top: Any
    input_alphabet: RankedAlphabet
    output_alphabet: RankedAlphabet
    init_state: Any
    automaton: BottomUpAutomaton  # over labels (sym, mem, state-or-notHere)
    rhs: Mapping  # automaton state -> RHS context
    allow_stay: bool = False


def lookaround_step(lm: LookaroundMachine, t: Tree, c: HennieConfig, init_map) -> Tree:
    enc = encode_configuration(lm, t, c, init_map)
    la_state = lm.automaton.value(enc)
    rhs = lm.rhs.get(la_state)
    if rhs is None:
        raise UndefinedTransition(c, la_state)

    def resolve(nd: Tree) -> Tree:
        hd = nd.label
        if isinstance(hd, Head):
            from .generic import Proc
            from .hennie import neighbor_checked

            new_mem = c.mem.set(c.pos, hd.mem)
            new_pos = c.pos if hd.dir == STAY else neighbor_checked(t, c, hd.dir)
            return Tree(Proc(HennieConfig(new_pos, hd.state, new_mem)))
        return Tree(nd.label, tuple(resolve(ch) for ch in nd.children))

    return resolve(rhs)


def lookaround_generic(lm: LookaroundMachine, t: Tree) -> GenericMachine:
    init_map = {u: lm.top for u in t.addresses()}
    return GenericMachine(
        initial=HennieConfig((), lm.init_state, FrozenDict()),
        step=lambda c: lookaround_step(lm, t, c, init_map),
    )


def run_lookaround(lm: LookaroundMachine, t: Tree, fuel: int = 10**6):
    """Reference interpreter: evaluates the automaton on the full encoding."""
    from .generic import run_generic

    return run_generic(lookaround_generic(lm, t), fuel)


def eliminate_lookaround(lm: LookaroundMachine, max_la_states: int = 6) -> HennieMachine:
    """Equivalent plain machine with bottom-up initialization.

    States carry the one neighborhood summary the memory cannot know (the
    direction of the last departure says which); memory caches the
    automaton values of the child subtrees and the context function.
    The construction is exponential in |Q_LA| by nature, hence the cap.
    """
    q_la = tuple(lm.automaton.states)
    if len(q_la) > max_la_states:
        raise HennieError(
            f"lookaround automaton has {len(q_la)} states; cap is {max_la_states}"
        )
    sigma = lm.input_alphabet
    mr = sigma.max_rank
    identity = FrozenDict({s: s for s in q_la})

    def la_step(sym, mem, q, kid_values) -> Any:
        return lm.automaton.step((sym, mem, q), tuple(kid_values))

    # initializer: value and children-values of each subtree, under all-top
    # memory with the head elsewhere
    def b_delta(key):
        sym, combo = key
        vals = tuple(v for v, _kids in combo)
        return (la_step(sym, lm.top, NOTHERE, vals), vals + (None,) * (mr - len(vals)))

    b_auto = BottomUpAutomaton(states=(), delta=LazyDelta(b_delta))

    class _InitMap:
        def __getitem__(self, state):
            _v, kids = state
            return (lm.top, UP, kids, identity)

    def build_rule(key):
        (qp, sym), mem_t = key[:2], key[2]
        q, p = qp if isinstance(qp, tuple) else (None, None)
        if not (isinstance(qp, tuple) and len(qp) == 2):
            return None
        if not (isinstance(mem_t, tuple) and len(mem_t) == 4):
            return None
        mem, d, kids, f = mem_t
        rank = sigma.rank(sym)
        rho = [p if d == i else kids[i - 1] for i in range(1, rank + 1)]
        phi = p if d == UP else f
        if any(v is None for v in rho) or not isinstance(phi, FrozenDict):
            return None
        la = phi[la_step(sym, mem, q, rho)]
        rhs = lm.rhs.get(la)
        if rhs is None:
            return None

        def conv(nd: Tree) -> Optional[Tree]:
            hd = nd.label
            if isinstance(hd, Head):
                kids2 = tuple(rho) + (None,) * (mr - rank)
                if hd.dir == UP:
                    p2 = la_step(sym, hd.mem, NOTHERE, rho)
                elif hd.dir == STAY:
                    p2 = la
                else:
                    i = hd.dir
                    p2 = FrozenDict(
                        {
                            x: phi[la_step(sym, hd.mem, NOTHERE, rho[: i - 1] + [x] + rho[i:])]
                            for x in q_la
                        }
                    )
                new_mem = (hd.mem, hd.dir, kids2, phi)
                return Tree(Head((hd.state, p2), new_mem, hd.dir))
            return Tree(nd.label, tuple(conv(ch) for ch in nd.children))

        return conv(rhs)

    return HennieMachine(
        states=(),
        memory=(),
        top=None,
        input_alphabet=sigma,
        output_alphabet=lm.output_alphabet,
        init_state=(lm.init_state, identity),
        rules=LazyRules(build_rule),
        allow_stay=lm.allow_stay,
        initializer=BottomUpInit(b_auto, _InitMap()),
    )
