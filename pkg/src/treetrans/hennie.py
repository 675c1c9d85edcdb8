"""Tree-to-tree Hennie machines: syntax, semantics, visit monitors.

A machine walks its input tree with a finite-state head, may rewrite one
memory symbol per node, and emits the output top-down; forking right-hand
sides spawn one process per output branch, each with its own copy of the
memory map (the branchwise view of the shared-memory semantics).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Any, Iterator, Mapping, Optional

from .bottomup import BottomUpAutomaton
from .generic import (
    Completed,
    ConfigPath,
    GenericMachine,
    MachineStuck,
    Proc,
    RunResult,
    config_paths,
    run_generic,
)
from .trees import (
    STAY,
    UP,
    Address,
    RankedAlphabet,
    Tree,
    contains_address,
    is_ancestor,
    label_at,
    neighbor,
    subtree_at,
)
from .util import FrozenDict, TreetransError


class HennieError(TreetransError):
    pass


class UndefinedTransition(MachineStuck):
    def __init__(self, config, key):
        super().__init__(config, f"undefined transition for {key!r}")
        self.key = key


class MoveOutOfTree(MachineStuck):
    def __init__(self, config, direction):
        super().__init__(config, f"move {direction!r} leaves the input tree")
        self.direction = direction


@dataclass(frozen=True)
class Head:
    """A process leaf in a transition right-hand side: (state, memory, direction)."""

    state: Any
    mem: Any
    dir: Any  # UP, STAY or a 1-based child index


@dataclass(frozen=True)
class BottomUpInit:
    """Bottom-up initializer: node u starts with init[automaton value of t|_u]."""

    automaton: BottomUpAutomaton
    init: Mapping  # automaton state -> memory symbol


@dataclass(frozen=True)
class HennieMachine:
    states: tuple
    memory: tuple
    top: Any
    input_alphabet: RankedAlphabet
    output_alphabet: RankedAlphabet
    init_state: Any
    rules: Any  # mapping (state, sym, mem) -> RHS context over Gamma with Head leaves
    allow_stay: bool = False
    initializer: Optional[BottomUpInit] = None

    def rule(self, state, sym, mem):
        return self.rules.get((state, sym, mem))

    def validate(self) -> None:
        """Sanity-check an explicit-table machine (no-op for lazy tables)."""
        if not hasattr(self.rules, "items"):
            return
        if self.memory.count(self.top) != 1:
            raise HennieError("the initial memory symbol must occur exactly once")
        for (state, sym, mem), rhs in self.rules.items():
            if state not in self.states or mem not in self.memory:
                raise HennieError(f"rule {(state, sym, mem)!r} uses undeclared state/memory")
            rank = self.input_alphabet.rank(sym)
            for h in _heads(rhs):
                if h.state not in self.states or h.mem not in self.memory:
                    raise HennieError(f"head {h!r} uses undeclared state/memory")
                if h.dir == STAY:
                    if not self.allow_stay:
                        raise HennieError("stay direction in a machine without stays")
                elif h.dir != UP and not (isinstance(h.dir, int) and 1 <= h.dir <= rank):
                    raise HennieError(f"direction {h.dir!r} invalid under {sym!r} (rank {rank})")
            _check_output_part(rhs, self.output_alphabet)


def _heads(rhs: Tree) -> Iterator[Head]:
    if isinstance(rhs.label, Head):
        yield rhs.label
        return
    for c in rhs.children:
        yield from _heads(c)


def _check_output_part(rhs: Tree, gamma: RankedAlphabet) -> None:
    if isinstance(rhs.label, Head):
        if rhs.children:
            raise HennieError("head triples must be leaves")
        return
    if gamma.rank(rhs.label) != len(rhs.children):
        raise HennieError(f"output symbol {rhs.label!r} used with wrong arity")
    for c in rhs.children:
        _check_output_part(c, gamma)


@dataclass(frozen=True)
class HennieConfig:
    """Head position, control state, and the written part of the memory."""

    pos: Address
    state: Any
    mem: FrozenDict  # sparse: unwritten nodes read their initial value


def initial_memory(m: HennieMachine, t: Tree) -> dict:
    """Per-node initial memory values (all-top, or the initializer's)."""
    if m.initializer is None:
        return {u: m.top for u in t.addresses()}
    auto = m.initializer.automaton
    init = m.initializer.init
    out = {}

    def go(cur: Tree, addr: Address):
        states = tuple(go(c, addr + (i,)) for i, c in enumerate(cur.children, 1))
        s = auto.step(cur.label, states)
        out[addr] = init[s]
        return s

    go(t, ())
    return out


def initial_config(m: HennieMachine, t: Tree) -> HennieConfig:
    return HennieConfig((), m.init_state, FrozenDict())


def hennie_step(
    m: HennieMachine, t: Tree, c: HennieConfig, init_map: Mapping | None = None
) -> Tree:
    """One computation step: apply the transition then move each head leaf."""
    if init_map is None:
        init_map = initial_memory(m, t)
    sym = label_at(t, c.pos)
    mem_here = c.mem.get(c.pos, init_map[c.pos])
    key = (c.state, sym, mem_here)
    rhs = m.rule(c.state, sym, mem_here)
    if rhs is None:
        raise UndefinedTransition(c, key)

    def resolve(node: Tree) -> Tree:
        h = node.label
        if isinstance(h, Head):
            new_mem = c.mem.set(c.pos, h.mem)
            new_pos = c.pos if h.dir == STAY else neighbor_checked(t, c, h.dir)
            return Tree(Proc(HennieConfig(new_pos, h.state, new_mem)))
        return Tree(node.label, tuple(resolve(ch) for ch in node.children))

    return resolve(rhs)


def neighbor_checked(t: Tree, c: HennieConfig, d) -> Address:
    if d == UP:
        if not c.pos:
            raise MoveOutOfTree(c, d)
        return c.pos[:-1]
    new = c.pos + (d,)
    if not contains_address(t, new):
        raise MoveOutOfTree(c, d)
    return new


def hennie_generic(m: HennieMachine, t: Tree) -> GenericMachine:
    init_map = initial_memory(m, t)
    return GenericMachine(
        initial=initial_config(m, t),
        step=lambda c: hennie_step(m, t, c, init_map),
    )


# ---------------------------------------------------------------------------
# visit statistics


@dataclass
class PathStats:
    """Visit counts of one branch-outputting run."""

    visits: dict
    downward: dict
    outcome: str

    @property
    def max_visits(self) -> int:
        return max(self.visits.values(), default=0)


@dataclass
class VisitStats:
    paths: list[PathStats]

    @property
    def max_visits(self) -> int:
        return max((p.max_visits for p in self.paths), default=0)

    def max_downward_at(self, addrs: frozenset) -> int:
        return max(
            (sum(p.downward.get(u, 0) for u in addrs) for p in self.paths),
            default=0,
        )


def path_stats(path: ConfigPath) -> PathStats:
    visits: dict = {}
    downward: dict = {}
    prev = None
    for cfg in path.configs:
        visits[cfg.pos] = visits.get(cfg.pos, 0) + 1
        if prev is not None and len(cfg.pos) == len(prev.pos) + 1 and cfg.pos[: len(prev.pos)] == prev.pos:
            downward[cfg.pos] = downward.get(cfg.pos, 0) + 1
        prev = cfg
    return PathStats(visits, downward, path.outcome)


def run_hennie(m: HennieMachine, t: Tree, fuel: int = 10**6) -> tuple[RunResult, VisitStats]:
    gm = hennie_generic(m, t)
    result = run_generic(gm, fuel)
    stats = VisitStats([path_stats(p) for p in config_paths(gm, fuel)])
    return result, stats


def hennie_semantics(m: HennieMachine, t: Tree, fuel: int = 10**6) -> Tree | None:
    """The machine's partial function: output tree, or None when undefined."""
    result = run_generic(hennie_generic(m, t), fuel)
    return result.tree if isinstance(result, Completed) else None


@dataclass(frozen=True)
class Counterexample:
    node: Address
    count: int
    positions: tuple


def check_visit_bound(
    m: HennieMachine, t: Tree, bound: int, fuel: int = 10**6
) -> Optional[Counterexample]:
    """None iff every branch-outputting run visits every node at most `bound` times."""
    gm = hennie_generic(m, t)
    for path in config_paths(gm, fuel):
        counts: dict = {}
        for cfg in path.configs:
            counts[cfg.pos] = counts.get(cfg.pos, 0) + 1
            if counts[cfg.pos] > bound:
                return Counterexample(cfg.pos, counts[cfg.pos], tuple(c.pos for c in path.configs))
    return None


def max_antichain_visits(stats: PathStats, t: Tree) -> int:
    """Max over antichains S of the total visits at S, for one run.

    Standard max-weight-antichain DP: g(u) = max(visits(u), sum_i g(ui)).
    """

    def g(cur: Tree, addr: Address) -> int:
        own = stats.visits.get(addr, 0)
        kids = sum(g(c, addr + (i,)) for i, c in enumerate(cur.children, 1))
        return max(own, kids)

    return g(t, ())


def antichain_visits_bruteforce(stats: PathStats, t: Tree) -> int:
    """Exhaustive oracle over all antichains; exponential, tiny inputs only."""
    addrs = list(t.addresses())
    best = 0
    for mask in range(1, 1 << len(addrs)):
        chosen = [addrs[i] for i in range(len(addrs)) if mask >> i & 1]
        ok = all(
            not (is_ancestor(u, v) or is_ancestor(v, u))
            for i, u in enumerate(chosen)
            for v in chosen[i + 1:]
        )
        if ok:
            best = max(best, sum(stats.visits.get(u, 0) for u in chosen))
    return best


def min_chain_cover_size(addrs: frozenset) -> int:
    """Minimum number of root-to-leaf branches covering a set of nodes.

    Equals the maximum antichain size inside the set (Dilworth on forests):
    count the members of the set that have no strict descendant in the set.
    """
    return sum(
        1
        for u in addrs
        if not any(u != v and is_ancestor(u, v) for v in addrs)
    )


# ---------------------------------------------------------------------------
# weight-reducing machines


def write_graph(m: HennieMachine) -> dict:
    """Edges m -> m' whenever some rule read with memory m writes m'."""
    edges: dict = {mem: set() for mem in m.memory}
    for (state, sym, mem), rhs in m.rules.items():
        for h in _heads(rhs):
            edges[mem].add(h.mem)
    return edges


def infer_memory_order(m: HennieMachine) -> Optional[dict]:
    """Witness order from the write graph: level(m) = |{m' reachable from m}|.

    Returns None when no witness exists (a write cycle, or a write into the
    initial symbol, kills every candidate order).
    """
    edges = write_graph(m)
    if any(m.top in targets for targets in edges.values()):
        return None
    reach: dict = {}

    def go(x, stack):
        if x in reach:
            return reach[x]
        if x in stack:
            raise _CycleFound()
        stack.add(x)
        acc = set()
        for y in edges[x]:
            acc.add(y)
            acc |= go(y, stack)
        stack.remove(x)
        reach[x] = acc
        return acc

    try:
        for mem in m.memory:
            if mem in go(mem, set()):
                return None
    except _CycleFound:
        return None
    return {mem: len(reach[mem]) for mem in m.memory}


class _CycleFound(Exception):
    pass


def order_from_pairs(memory: tuple, pairs) -> dict:
    """Levels from strict pairs (greater, lesser); rejects non-orders."""
    greater: dict = {mem: set() for mem in memory}
    for g, l in pairs:
        if g not in greater or l not in greater:
            raise HennieError(f"pair ({g!r}, {l!r}) mentions unknown memory symbols")
        greater[g].add(l)
    # transitive closure + cycle check
    levels: dict = {}

    def depth(x, stack):
        if x in levels:
            return levels[x]
        if x in stack:
            raise HennieError("witness is not a partial order (cycle)")
        stack.add(x)
        d = 1 + max((depth(y, stack) for y in greater[x]), default=0)
        stack.remove(x)
        levels[x] = d
        return d

    for mem in memory:
        depth(mem, set())
    return levels


def is_weight_reducing(m: HennieMachine, witness=None) -> bool:
    """Check Def: top maximal, every written symbol strictly below the one read.

    `witness` is either a mapping memory -> level or an iterable of strict
    (greater, lesser) pairs; omitted, a witness is inferred from the rules.
    """
    if witness is None:
        levels = infer_memory_order(m)
        if levels is None:
            return False
    elif isinstance(witness, Mapping):
        levels = dict(witness)
    else:
        levels = order_from_pairs(m.memory, witness)
    if any(levels[mem] > levels[m.top] for mem in m.memory):
        return False
    for (state, sym, mem), rhs in m.rules.items():
        for h in _heads(rhs):
            if levels[h.mem] >= levels[mem]:
                return False
    return True


def memory_weights(m: HennieMachine) -> dict:
    """omega(mem) = number of symbols strictly below, per the inferred order."""
    edges = write_graph(m)
    reach: dict = {}

    def go(x):
        if x in reach:
            return reach[x]
        reach[x] = set()
        acc = set()
        for y in edges[x]:
            acc.add(y)
            acc |= go(y)
        reach[x] = acc
        return acc

    for mem in m.memory:
        go(mem)
    return {mem: len(reach[mem]) for mem in m.memory}


# ---------------------------------------------------------------------------
# weight-reducing cap (totalizing, bounded-visit by construction)


@dataclass(frozen=True)
class CapMem:
    base: Any
    counter: int
    at_root: bool


_CAP_START = "__cap_start"


def cap_weight_reducing(m: HennieMachine, bound: int, default_leaf: str) -> HennieMachine:
    """Total weight-reducing machine agreeing with m on bound-visit inputs.

    Memory carries a per-node countdown initialized to `bound`; each visit
    decrements it, and an exhausted counter, an undefined transition, or an
    upward exit from the root all emit the default leaf instead.  The first
    transition (necessarily at the root) marks the root in memory.
    """
    if m.initializer is not None:
        raise HennieError("cap expects a plain machine (inline the initializer first)")
    if m.allow_stay:
        raise HennieError("cap expects a stay-free machine (eliminate stays first)")
    gamma = m.output_alphabet.extend([(default_leaf, 0)])
    default = Tree(default_leaf)
    states = tuple(m.states) + (_CAP_START,)
    memory = tuple(
        CapMem(b, c, r) for b in m.memory for c in range(bound, -1, -1) for r in (False, True)
    )
    top = CapMem(m.top, bound, False)

    def capped_rhs(state, sym, mem: CapMem, started: bool):
        at_root = mem.at_root or started
        if mem.counter == 0:
            return default
        rhs = m.rule(state, sym, mem.base)
        if rhs is None:
            return default

        def conv(nd: Tree) -> Tree:
            h = nd.label
            if isinstance(h, Head):
                if h.dir == UP and at_root:
                    return default
                return Tree(Head(h.state, CapMem(h.mem, mem.counter - 1, at_root), h.dir))
            return Tree(nd.label, tuple(conv(c) for c in nd.children))

        return conv(rhs)

    rules = {}
    for sym, rank in m.input_alphabet.symbols:
        for mem in memory:
            for q in m.states:
                rules[(q, sym, mem)] = capped_rhs(q, sym, mem, False)
            rules[(_CAP_START, sym, mem)] = capped_rhs(m.init_state, sym, mem, True)
    return HennieMachine(
        states=states,
        memory=memory,
        top=top,
        input_alphabet=m.input_alphabet,
        output_alphabet=gamma,
        init_state=_CAP_START,
        rules=rules,
    )


def cap_memory_order(capped: HennieMachine):
    """Strict pairs witnessing that a capped machine is weight-reducing."""
    return [
        (a, b)
        for a in capped.memory
        for b in capped.memory
        if a.counter > b.counter
    ]


# ---------------------------------------------------------------------------
# configuration encoding (shared with regular lookaround)

NOTHERE = "notHere"


def encode_configuration(m, t: Tree, c: HennieConfig, init_map: Mapping | None = None) -> Tree:
    """Same domain as t; labels (input symbol, memory value, state or notHere)."""
    if init_map is None:
        init_map = initial_memory(m, t)

    def go(cur: Tree, addr: Address) -> Tree:
        mem = c.mem.get(addr, init_map[addr])
        q = c.state if addr == c.pos else NOTHERE
        return Tree((cur.label, mem, q), tuple(go(ch, addr + (i,)) for i, ch in enumerate(cur.children, 1)))

    return go(t, ())


def decode_configuration(enc: Tree) -> tuple[Address, Any, dict]:
    """Inverse of encode_configuration: recover (position, state, memory map)."""
    pos = None
    state = None
    mem = {}
    for u in enc.addresses():
        sym, mu, q = label_at(enc, u)
        mem[u] = mu
        if q != NOTHERE:
            pos, state = u, q
    if pos is None:
        raise HennieError("no head in encoded configuration")
    return pos, state, mem


# ---------------------------------------------------------------------------
# library fixture: the canonical narrow-visit machine


def identity_thm(alph: RankedAlphabet) -> HennieMachine:
    """Copies its input; one state, one memory symbol, forks downward."""
    rules = {}
    for sym, rank in alph.symbols:
        rhs = Tree(sym, tuple(Tree(Head("q", "t", i)) for i in range(1, rank + 1)))
        rules[("q", sym, "t")] = rhs
    return HennieMachine(
        states=("q",),
        memory=("t",),
        top="t",
        input_alphabet=alph,
        output_alphabet=alph,
        init_state="q",
        rules=rules,
    )
