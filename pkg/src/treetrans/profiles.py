"""Hennie profiles: per-node visit abstractions of branch-outputting runs.

A local profile lists the (state, rule branch) pairs a run leaves at one
input node, threading the memory written by each visit into the next; a
global profile assigns one to every node.  Coherent global profiles are
those whose visit pairs chain into a single walk from the initial
configuration, and they correspond exactly to output nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Any, Iterator, Mapping, Optional

from .generic import MachineStuck
from .hennie import Head, HennieConfig, HennieMachine, hennie_generic, initial_memory
from .trees import UP, Address, Tree, label_at, neighbor, subtree_at
from .util import TreetransError


class ProfileError(TreetransError):
    pass


@dataclass(frozen=True)
class RhsBranch:
    """One (possibly truncated) branch of a rule right-hand side."""

    steps: tuple[tuple[Any, int], ...]  # (output symbol, child index) path
    end: Any  # Head, an output leaf symbol, or Truncated
    head: Optional[Head]  # the head when the branch continues, else None


@dataclass(frozen=True)
class Truncated:
    """Marker for a branch cut at an inner output node."""

    sym: Any


def full_branches(rhs: Tree) -> list[RhsBranch]:
    out = []

    def walk(nd: Tree, prefix):
        if isinstance(nd.label, Head):
            out.append(RhsBranch(prefix, nd.label, nd.label))
            return
        if not nd.children:
            out.append(RhsBranch(prefix, nd.label, None))
            return
        for i, c in enumerate(nd.children, 1):
            walk(c, prefix + ((nd.label, i),))

    walk(rhs, ())
    return out


def prefix_branches(rhs: Tree) -> list[RhsBranch]:
    """Full branches plus truncations at inner output nodes.

    Truncating at a leaf would coincide with the full branch ending there,
    so only nodes with children yield a Truncated marker.
    """
    out = list(full_branches(rhs))

    def walk(nd: Tree, prefix):
        if isinstance(nd.label, Head):
            return
        if nd.children:
            out.append(RhsBranch(prefix, Truncated(nd.label), None))
        for i, c in enumerate(nd.children, 1):
            walk(c, prefix + ((nd.label, i),))

    walk(rhs, ())
    return out


@dataclass(frozen=True)
class VisitPair:
    state: Any
    branch: RhsBranch


LocalProfile = tuple  # tuple of VisitPair
GlobalProfile = Mapping  # Address -> LocalProfile


def enumerate_local_profiles(
    m: HennieMachine, sym: Any, bound: int
) -> frozenset[LocalProfile]:
    """All memory-threaded visit-pair sequences of length <= bound over sym.

    All but the last pair must follow a full branch ending in a head (the
    run leaves and may come back); the last pair may end anywhere.
    """
    if bound < 1:
        raise ProfileError("the visit bound must be at least 1")
    out: set = {()}  # unvisited nodes carry the empty profile

    def extend(seq: tuple, mem: Any):
        if seq:
            out.add(seq)
        if len(seq) >= bound:
            return
        for q in m.states:
            rhs = m.rule(q, sym, mem)
            if rhs is None:
                continue
            for br in prefix_branches(rhs):
                if br.head is not None:
                    extend(seq + (VisitPair(q, br),), br.head.mem)
                else:
                    out.add(seq + (VisitPair(q, br),))

    extend((), m.top)
    return frozenset(out)


@dataclass(frozen=True)
class ExecutionOrder:
    """Total order on (node, pair index) entries realizing the walk."""

    entries: tuple[tuple[Address, int], ...]


@dataclass(frozen=True)
class Incoherent:
    reason: str


def check_coherence(m: HennieMachine, t: Tree, g: GlobalProfile):
    """Find the execution order of a global profile, or say why none exists.

    The successor relation is functional: follow head triples from the
    root's first pair, consuming each node's pairs in order; the profile is
    coherent iff the walk starts in the initial state, stays valid, ends at
    a non-head branch, and consumes every pair exactly once.
    """
    for u in t.addresses():
        if u not in g:
            return Incoherent(f"no local profile at {u}")
    consumed = {u: 0 for u in t.addresses()}
    total = sum(len(g[u]) for u in t.addresses())
    pos: Address = ()
    state = m.init_state
    order: list = []
    mem_written = {u: m.top for u in t.addresses()}
    while True:
        prof = g[pos]
        idx = consumed[pos]
        if idx >= len(prof):
            return Incoherent(f"walk revisits {pos} beyond its profile")
        pair = prof[idx]
        if pair.state != state:
            return Incoherent(f"pair {idx} at {pos} expects state {pair.state!r}, walk in {state!r}")
        rhs = m.rule(state, label_at(t, pos), mem_written[pos])
        if rhs is None:
            return Incoherent(f"undefined transition at {pos}")
        if pair.branch not in prefix_branches(rhs):
            return Incoherent(f"branch of pair {idx} at {pos} is not a branch of the rule read there")
        consumed[pos] = idx + 1
        order.append((pos, idx + 1))
        if pair.branch.head is None:
            break
        h = pair.branch.head
        mem_written[pos] = h.mem
        if h.dir == UP and not pos:
            return Incoherent("walk exits the root")
        new_pos = neighbor(pos, h.dir)
        try:
            subtree_at(t, new_pos)
        except Exception:
            return Incoherent(f"walk leaves the tree at {pos} via {h.dir!r}")
        pos, state = new_pos, h.state
    if sum(consumed.values()) != total:
        return Incoherent("walk ends before consuming every visit pair")
    return ExecutionOrder(tuple(order))


def coherent_global_profiles(
    m: HennieMachine, t: Tree, bound: int, limit: int = 10**6
) -> Iterator[GlobalProfile]:
    """Exhaustive enumeration of coherent profiles; exponential, keep t tiny."""
    addrs = list(t.addresses())
    locals_per_node = [
        sorted(enumerate_local_profiles(m, label_at(t, u), bound), key=repr) for u in addrs
    ]
    count = 0
    for combo in product(*locals_per_node):
        count += 1
        if count > limit:
            raise ProfileError(f"assignment space exceeds the {limit} cap")
        g = dict(zip(addrs, combo))
        if isinstance(check_coherence(m, t, g), ExecutionOrder):
            yield g


def profile_of_output_node(m: HennieMachine, t: Tree, target: Address) -> GlobalProfile:
    """Extract the global profile of the run producing one output node."""
    init_map = initial_memory(m, t)
    profile = {u: [] for u in t.addresses()}
    pos: Address = ()
    state = m.init_state
    mem = dict(init_map)
    remaining = tuple(target)
    while True:
        sym = label_at(t, pos)
        rhs = m.rule(state, sym, mem[pos])
        if rhs is None:
            raise ProfileError(f"run is undefined at {pos}")
        steps, endpoint = _branch_toward(rhs, remaining)
        if endpoint is None:
            # the target output node sits inside this rule's output prefix
            sym_here = _label_along(rhs, remaining)
            br = RhsBranch(steps, _truncate_end(rhs, remaining), None)
            profile[pos].append(VisitPair(state, br))
            return {u: tuple(v) for u, v in profile.items()}
        br, h, consumed = endpoint
        profile[pos].append(VisitPair(state, br))
        remaining = remaining[consumed:]
        mem[pos] = h.mem
        pos = neighbor(pos, h.dir)
        state = h.state


def _branch_toward(rhs: Tree, remaining: tuple):
    """Follow the output address into the rule context.

    Returns (steps, None) when the address ends inside the context, else
    (steps, (branch, head, consumed)) for the head leaf it runs into.
    """
    steps: list = []
    nd = rhs
    consumed = 0
    while True:
        if isinstance(nd.label, Head):
            br = RhsBranch(tuple(steps), nd.label, nd.label)
            return tuple(steps), (br, nd.label, consumed)
        if consumed == len(remaining):
            return tuple(steps), None
        i = remaining[consumed]
        if not 1 <= i <= len(nd.children):
            raise ProfileError("output address leaves the produced prefix")
        steps.append((nd.label, i))
        nd = nd.children[i - 1]
        consumed += 1


def _label_along(rhs: Tree, addr: tuple):
    nd = rhs
    for i in addr:
        nd = nd.children[i - 1]
    return nd.label


def _truncate_end(rhs: Tree, addr: tuple):
    lbl = _label_along(rhs, addr)
    nd = rhs
    for i in addr:
        nd = nd.children[i - 1]
    if isinstance(nd.label, Head):
        raise ProfileError("output node address hit a head")
    if not nd.children:
        return nd.label  # a full branch ending at an output leaf
    return Truncated(nd.label)


def decode_profile(m: HennieMachine, t: Tree, g: GlobalProfile):
    """Replay a coherent profile into (output label, branch word to the node)."""
    witness = check_coherence(m, t, g)
    if not isinstance(witness, ExecutionOrder):
        raise ProfileError(f"profile is not coherent: {witness.reason}")
    word: list = []
    last_label = None
    for u, idx in witness.entries:
        pair = g[u][idx - 1]
        word.extend(pair.branch.steps)
        end = pair.branch.end
        if pair.branch.head is None:
            last_label = end.sym if isinstance(end, Truncated) else end
    return last_label, tuple(word)


def is_profile_extension(parent_prof: GlobalProfile, child_prof: GlobalProfile, t: Tree) -> bool:
    """Pointwise: the parent's local profiles are prefixes of the child's,
    allowing the parent's final (possibly truncated) pair to be extended."""
    for u in t.addresses():
        a, b = tuple(parent_prof[u]), tuple(child_prof[u])
        if len(a) > len(b):
            return False
        for i, (pa, pb) in enumerate(zip(a, b)):
            if pa == pb:
                continue
            if i != len(a) - 1:
                return False
            if pa.state != pb.state:
                return False
            if pa.branch.steps != pb.branch.steps[: len(pa.branch.steps)]:
                return False
    return True
