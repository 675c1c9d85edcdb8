"""Composition of a narrow-visit machine with a Hennie machine.

The composed machine runs the outer machine N over the intermediate tree
semantics-of-H(t) without materializing it: each input node stores a forest
of fragments (decorated right-hand sides of H rules produced at that node),
fragments are stitched together through matched link symbols, and H is
evaluated lazily whenever N asks for a part of the intermediate tree that
does not exist yet.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterator, Mapping, Optional

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
from .hennie import Head, HennieConfig, HennieMachine, initial_memory
from .trees import STAY, UP, Address, Tree, contains_address, label_at, parent
from .util import FrozenDict, TreetransError


class ComposeError(TreetransError):
    pass


class ForestOverflow(MachineStuck):
    def __init__(self, config, size, cap):
        super().__init__(config, f"forest of size {size} exceeds cap {cap}")


class UndefinedInRegime(ComposeError):
    pass


class NotDecodable(ComposeError):
    pass


# ---------------------------------------------------------------------------
# memory values


@dataclass(frozen=True)
class DownLink:
    """Leaf marking an already-materialized fragment one input step away."""

    mem: Any  # last memory H wrote at this node, along this branch
    dir: Any
    index: int


@dataclass(frozen=True)
class UpLink:
    """Unary root linking a fragment back to the one that spawned it."""

    mem: Any  # memory H read at this node when the fragment was made
    dir: Any
    index: int


@dataclass(frozen=True)
class DownNewLink:
    """Leaf holding a pending H head: state, memory written here, direction."""

    state: Any
    mem: Any
    dir: Any


LINK_TYPES = (DownLink, UpLink, DownNewLink)


@dataclass(frozen=True)
class PointedTree:
    tree: Tree  # labels: (gamma, n_memory) pairs or Link symbols
    point: Address

    def label(self) -> Any:
        return label_at(self.tree, self.point)


@dataclass(frozen=True)
class PointedForest:
    trees: tuple[PointedTree, ...]
    focus: int  # 1-based; 0 only for the empty forest

    def __len__(self) -> int:
        return len(self.trees)

    def focused(self) -> PointedTree:
        return self.trees[self.focus - 1]


EMPTY_FOREST = PointedForest((), 0)


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class QZero:
    pass


@dataclass(frozen=True)
class NState:
    state: Any


@dataclass(frozen=True)
class GState:
    state: Any
    index: int


@dataclass(frozen=True)
class HState:
    n_state: Any
    h_state: Any
    index: int
    back_index: int  # fragment to link back to (the spawning forest's focus)
    back_dir: Any  # direction from the new node back to the spawning node


@dataclass(frozen=True)
class ComposedMachine:
    outer: HennieMachine  # N, assumed narrow-visit on H's range
    inner: HennieMachine  # H, bounded-visit
    c_fv: int
    c_fnv: int

    @property
    def c_fs(self) -> int:
        return self.c_fv * self.c_fnv

    def __post_init__(self):
        if self.inner.initializer is not None or self.outer.initializer is not None:
            raise ComposeError("compose expects plain machines (inline initializers first)")
        if self.inner.allow_stay or self.outer.allow_stay:
            raise ComposeError("compose expects stay-free machines")
        for sym, rank in self.inner.output_alphabet.symbols:
            if sym not in self.outer.input_alphabet or self.outer.input_alphabet.rank(sym) != rank:
                raise ComposeError(f"intermediate symbol {sym!r} unknown to the outer machine")


def _star(cm: ComposedMachine, rhs: Tree) -> Tree:
    """Decorate a rule right-hand side: N-memory on outputs, links for heads."""
    if isinstance(rhs.label, Head):
        h = rhs.label
        return Tree(DownNewLink(h.state, h.mem, h.dir))
    return Tree((rhs.label, cm.outer.top), tuple(_star(cm, c) for c in rhs.children))


def _write_point(pt: PointedTree, new_label) -> PointedTree:
    def go(tr: Tree, addr: Address) -> Tree:
        if not addr:
            return Tree(new_label, tr.children)
        i = addr[0]
        kids = list(tr.children)
        kids[i - 1] = go(kids[i - 1], addr[1:])
        return Tree(tr.label, tuple(kids))

    return PointedTree(go(pt.tree, pt.point), pt.point)


def _move_point(pt: PointedTree, d) -> Optional[PointedTree]:
    if d == UP:
        if not pt.point:
            return None
        return PointedTree(pt.tree, pt.point[:-1])
    new = pt.point + (d,)
    if not contains_address(pt.tree, new):
        return None
    return PointedTree(pt.tree, new)


def composed_step(cm: ComposedMachine, t: Tree, cfg: HennieConfig) -> Tree:
    sym = label_at(t, cfg.pos)
    forest: PointedForest = cfg.mem.get(cfg.pos, EMPTY_FOREST)
    state = cfg.state

    if isinstance(state, QZero):
        rhs = cm.inner.rule(cm.inner.init_state, sym, cm.inner.top)
        if rhs is None:
            raise MachineStuck(cfg, "inner machine undefined at the start")
        frag = PointedTree(_star(cm, rhs), ())
        new_forest = PointedForest((frag,), 1)
        return Tree(
            Proc(HennieConfig(cfg.pos, NState(cm.outer.init_state), cfg.mem.set(cfg.pos, new_forest)))
        )

    if isinstance(state, NState):
        if len(forest) == 0:
            raise MachineStuck(cfg, "no fragment loaded in the N-simulating regime")
        pt = forest.focused()
        lbl = pt.label()
        if isinstance(lbl, DownNewLink):
            # N -> H: move toward the missing fragment, fixing its index now
            dest = _neighbor(t, cfg.pos, lbl.dir)
            if dest is None:
                raise MachineStuck(cfg, "H head leaves the input tree")
            dest_len = len(cfg.mem.get(dest, EMPTY_FOREST))
            if dest_len + 1 > cm.c_fs:
                raise ForestOverflow(cfg, dest_len + 1, cm.c_fs)
            back_dir = cfg.pos[-1] if lbl.dir == UP else UP
            new_pt = _write_point(pt, DownLink(lbl.mem, lbl.dir, dest_len + 1))
            new_forest = _replace(forest, forest.focus, new_pt)
            st = HState(state.state, lbl.state, dest_len + 1, forest.focus, back_dir)
            return Tree(Proc(HennieConfig(dest, st, cfg.mem.set(cfg.pos, new_forest))))
        if isinstance(lbl, (DownLink, UpLink)):
            # N -> G: follow the link
            dest = _neighbor(t, cfg.pos, lbl.dir)
            if dest is None:
                raise MachineStuck(cfg, "link leaves the input tree")
            return Tree(Proc(HennieConfig(dest, GState(state.state, lbl.index), cfg.mem)))
        # driving transition: N -> N
        gamma, n_mem = lbl
        rhs = cm.outer.rule(state.state, gamma, n_mem)
        if rhs is None:
            raise MachineStuck(cfg, f"outer machine undefined at {(state.state, gamma, n_mem)!r}")

        def resolve(nd: Tree) -> Tree:
            h = nd.label
            if isinstance(h, Head):
                moved = _move_point(_write_point(pt, (gamma, h.mem)), h.dir)
                if moved is None:
                    raise MachineStuck(cfg, "outer machine exits the intermediate root")
                nf = _replace(forest, forest.focus, moved)
                return Tree(
                    Proc(HennieConfig(cfg.pos, NState(h.state), cfg.mem.set(cfg.pos, nf)))
                )
            return Tree(h, tuple(resolve(c) for c in nd.children))

        return resolve(rhs)

    if isinstance(state, GState):
        if state.index > len(forest):
            raise MachineStuck(cfg, "dangling link index")
        pt = forest.trees[state.index - 1]
        lbl = pt.label()
        if not isinstance(lbl, LINK_TYPES):
            raise MachineStuck(cfg, "re-entered fragment does not point at a link")
        d_entry = 1 if isinstance(lbl, UpLink) and pt.point == () else UP
        moved = _move_point(pt, d_entry)
        if moved is None:
            raise MachineStuck(cfg, "cannot move off the entry link")
        nf = _replace(PointedForest(forest.trees, state.index), state.index, moved)
        return Tree(Proc(HennieConfig(cfg.pos, NState(state.state), cfg.mem.set(cfg.pos, nf))))

    if isinstance(state, HState):
        if len(forest) == 0:
            mem_h = cm.inner.top
        else:
            plbl = forest.focused().label()
            if isinstance(plbl, LINK_TYPES):
                mem_h = plbl.mem
            else:
                raise MachineStuck(cfg, "H-simulating regime entered with a non-link point")
        rhs = cm.inner.rule(state.h_state, sym, mem_h)
        if rhs is None:
            raise MachineStuck(cfg, f"inner machine undefined at {(state.h_state, sym, mem_h)!r}")
        body = _star(cm, rhs)
        frag = PointedTree(Tree(UpLink(mem_h, state.back_dir, state.back_index), (body,)), (1,))
        if state.index != len(forest) + 1:
            raise MachineStuck(cfg, "fragment index no longer fresh")
        if state.index > cm.c_fs:
            raise ForestOverflow(cfg, state.index, cm.c_fs)
        nf = PointedForest(forest.trees + (frag,), state.index)
        return Tree(Proc(HennieConfig(cfg.pos, NState(state.n_state), cfg.mem.set(cfg.pos, nf))))

    raise MachineStuck(cfg, f"unknown regime {state!r}")


def _neighbor(t: Tree, pos: Address, d) -> Optional[Address]:
    if d == UP:
        return pos[:-1] if pos else None
    new = pos + (d,)
    return new if contains_address(t, new) else None


def _replace(forest: PointedForest, index: int, pt: PointedTree) -> PointedForest:
    trees = list(forest.trees)
    trees[index - 1] = pt
    return PointedForest(tuple(trees), index)


def composed_generic(cm: ComposedMachine, t: Tree) -> GenericMachine:
    return GenericMachine(
        initial=HennieConfig((), QZero(), FrozenDict()),
        step=lambda c: composed_step(cm, t, c),
    )


def run_composed(cm: ComposedMachine, t: Tree, fuel: int = 10**6) -> RunResult:
    return run_generic(composed_generic(cm, t), fuel)


def compose_hennie(
    outer: HennieMachine, inner: HennieMachine, c_fv: int, c_fnv: int
) -> ComposedMachine:
    return ComposedMachine(outer, inner, c_fv, c_fnv)


def max_forest_length(cfg: HennieConfig) -> int:
    return max((len(f) for f in cfg.mem.values()), default=0)


# ---------------------------------------------------------------------------
# stitched trees and decoding


@dataclass(frozen=True)
class StitchNode:
    origin: Address  # input node whose forest holds this node
    index: int  # 1-based fragment index in that forest
    addr: Address  # address within the fragment


@dataclass
class StitchedTree:
    root: StitchNode
    labels: dict  # StitchNode -> label
    children: dict  # StitchNode -> tuple of StitchNode

    def to_tree(self, node: Optional[StitchNode] = None) -> Tree:
        node = node or self.root
        return Tree(self.labels[node], tuple(self.to_tree(c) for c in self.children[node]))


def stitch(cm: ComposedMachine, t: Tree, cfg: HennieConfig) -> StitchedTree:
    """Glue all memory fragments along matched down/up link pairs."""
    if isinstance(cfg.state, HState):
        raise UndefinedInRegime("stitched tree is undefined in the H-simulating regime")
    if isinstance(cfg.state, QZero):
        raise UndefinedInRegime("nothing to stitch before initialization")
    labels: dict = {}
    children: dict = {}
    roots = []
    by_target: dict = {}  # (input node, fragment index) -> its fragment root node

    for u in t.addresses():
        forest = cfg.mem.get(u, EMPTY_FOREST)
        for i, pt in enumerate(forest.trees, 1):
            for addr in pt.tree.addresses():
                node = StitchNode(u, i, addr)
                sub = pt.tree.node_at(addr)
                labels[node] = sub.label
                children[node] = tuple(
                    StitchNode(u, i, addr + (j,)) for j in range(1, len(sub.children) + 1)
                )
            by_target[(u, i)] = StitchNode(u, i, ())
            roots.append((u, i))

    in_deg = {n: 0 for n in labels}
    for n, lbl in labels.items():
        for c in children[n]:
            in_deg[c] += 1
        if isinstance(lbl, DownLink):
            target = (_neighbor(t, n.origin, lbl.dir), lbl.index)
            match = by_target.get(target)
            if match is None:
                raise NotDecodable(f"unmatched down link at {n!r}")
            children[n] = (match,) + children[n]
            in_deg[match] += 1

    top = [n for n in labels if in_deg[n] == 0]
    if len(top) != 1:
        raise NotDecodable(f"stitched structure has {len(top)} roots")
    if any(v > 1 for v in in_deg.values()):
        raise NotDecodable("stitched structure has fan-in above one")
    seen = set()
    stack = [top[0]]
    while stack:
        n = stack.pop()
        if n in seen:
            raise NotDecodable("stitched structure has a cycle")
        seen.add(n)
        stack.extend(children[n])
    if len(seen) != len(labels):
        raise NotDecodable("stitched structure is not connected")
    return StitchedTree(top[0], labels, children)


def decode_h(cm: ComposedMachine, t: Tree, cfg: HennieConfig) -> Tree:
    """The global H state: output prefix with pending-configuration leaves.

    Down links splice out (their matched fragment continues the branch),
    up links splice out likewise, and each pending-head leaf becomes a
    configuration whose memory replays the writes along its stitch branch.
    """
    st = stitch(cm, t, cfg)

    def go(node: StitchNode, writes: tuple) -> Tree:
        lbl = st.labels[node]
        if isinstance(lbl, DownNewLink):
            writes = writes + ((node.origin, lbl.mem),)
            pos = _neighbor(t, node.origin, lbl.dir)
            if pos is None:
                raise NotDecodable("pending head outside the input tree")
            mem = {}
            for u, m in writes:
                mem[u] = m
            return Tree(Proc(HennieConfig(pos, lbl.state, FrozenDict(mem))))
        if isinstance(lbl, DownLink):
            writes = writes + ((node.origin, lbl.mem),)
            (only,) = st.children[node]
            return go(only, writes)
        if isinstance(lbl, UpLink):
            (only,) = st.children[node]
            return go(only, writes)
        gamma, _n_mem = lbl
        return Tree(gamma, tuple(go(c, writes) for c in st.children[node]))

    return go(st.root, ())


def decode_n(cm: ComposedMachine, t: Tree, cfg: HennieConfig) -> HennieConfig:
    """The outer machine's configuration over the intermediate tree."""
    if not isinstance(cfg.state, NState):
        raise NotDecodable("only N-simulating configurations decode to N configurations")
    forest = cfg.mem.get(cfg.pos, EMPTY_FOREST)
    if len(forest) == 0:
        raise NotDecodable("empty forest at the head position")
    point_node = StitchNode(cfg.pos, forest.focus, forest.focused().point)
    st = stitch(cm, t, cfg)
    if isinstance(st.labels[point_node], LINK_TYPES):
        raise NotDecodable("pointed node is a link")

    addr_of: dict = {}
    mem: dict = {}

    def through(node: StitchNode) -> StitchNode:
        # links are invisible in the intermediate tree; skip to their content
        while isinstance(st.labels[node], (DownLink, UpLink)):
            (node,) = st.children[node]
        return node

    def walk(node: StitchNode, addr: Address):
        lbl = st.labels[node]
        if isinstance(lbl, DownNewLink):
            return  # not yet materialized
        addr_of[node] = addr
        _gamma, n_mem = lbl
        mem[addr] = n_mem
        for j, c in enumerate(st.children[node], 1):
            walk(through(c), addr + (j,))

    walk(through(st.root), ())
    if point_node not in addr_of:
        raise NotDecodable("pointed node missing from the decoded prefix")
    sparse = {u: m for u, m in mem.items() if m != cm.outer.top}
    return HennieConfig(addr_of[point_node], cfg.state.state, FrozenDict(sparse))
