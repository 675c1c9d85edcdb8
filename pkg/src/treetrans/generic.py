"""Generic tree-generating machine runtime shared by all transducer models.

A machine is an initial configuration plus a partial computation-step
function from configurations to output contexts whose leaves are labeled
with successor configurations (wrapped in Proc).  Rewriting one process
leaf at a time yields the output tree; the rewrite order is leftmost-first
but the result is order-independent because each leaf is rewritten from its
own configuration alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterator

from .trees import Tree
from .util import TreetransError


@dataclass(frozen=True)
class Proc:
    """Label wrapping a configuration at a pending process leaf."""

    config: Any


class MachineStuck(TreetransError):
    """Raised by step functions on an undefined computation step."""

    def __init__(self, config: Any, reason: str = "undefined computation step"):
        super().__init__(reason)
        self.config = config
        self.reason = reason


@dataclass(frozen=True)
class GenericMachine:
    initial: Any
    step: Callable[[Any], Tree]  # raises MachineStuck when undefined


@dataclass(frozen=True)
class Completed:
    tree: Tree


@dataclass(frozen=True)
class OutOfFuel:
    partial: Tree


@dataclass(frozen=True)
class Stuck:
    partial: Tree
    config: Any
    reason: str


RunResult = Completed | OutOfFuel | Stuck


class _Slot:
    __slots__ = ("label", "children")

    def __init__(self, label, children):
        self.label = label
        self.children = children


def _freeze(slot) -> Tree:
    if isinstance(slot, Tree):
        return slot
    return Tree(slot.label, tuple(_freeze(c) for c in slot.children))


def run_generic(m: GenericMachine, fuel: int, order: str = "leftmost") -> RunResult:
    """Run to a normal form in at most `fuel` leaf rewrites.

    `order` picks which pending leaf is rewritten first; any order reaches
    the same output (confluence), so it only affects traces and partials.
    """
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    root = _Slot(Proc(m.initial), [])
    pending: list[_Slot] = [root]
    pop_index = -1 if order == "leftmost" else 0
    used = 0
    while pending:
        if used >= fuel:
            return OutOfFuel(_freeze(root))
        slot = pending.pop(pop_index)
        cfg = slot.label.config
        try:
            ctx = m.step(cfg)
        except MachineStuck as err:
            return Stuck(_freeze(root), err.config, err.reason)
        used += 1
        new_leaves = _graft(slot, ctx)
        if order == "leftmost":
            pending.extend(reversed(new_leaves))
        else:
            pending.extend(new_leaves)
    return Completed(_freeze(root))


def _graft(slot: _Slot, ctx: Tree) -> list[_Slot]:
    """Overwrite slot in place with the context; return its process-leaf slots."""
    leaves: list[_Slot] = []

    def build(t: Tree):
        if isinstance(t.label, Proc):
            s = _Slot(t.label, [])
            leaves.append(s)
            return s
        if t.is_leaf():
            return t
        return _Slot(t.label, [build(c) for c in t.children])

    slot.label = ctx.label
    if isinstance(ctx.label, Proc):
        slot.children = []
        leaves.append(slot)
    else:
        slot.children = [build(c) for c in ctx.children]
    return leaves


# ---------------------------------------------------------------------------
# branchwise semantics


@dataclass(frozen=True)
class BranchStep:
    """One branch of a computation-step context: label word plus endpoint."""

    labels: tuple[tuple[Any, int], ...]
    target: Any  # configuration if is_config else rank-0 output symbol
    is_config: bool


def branch_steps(ctx: Tree) -> list[BranchStep]:
    out: list[BranchStep] = []

    def walk(t: Tree, prefix: tuple):
        if isinstance(t.label, Proc):
            out.append(BranchStep(prefix, t.label.config, True))
            return
        if t.is_leaf():
            out.append(BranchStep(prefix, t.label, False))
            return
        for i, c in enumerate(t.children, 1):
            walk(c, prefix + ((t.label, i),))

    walk(ctx, ())
    return out


@dataclass(frozen=True)
class BranchPath:
    """A maximal branch-outputting run of the labeled transition system."""

    configs: tuple
    labels: tuple[tuple[Any, int], ...]
    terminal: Any  # rank-0 symbol for outcome "terminal", else None
    outcome: str  # "terminal" | "stuck" | "outoffuel"


def branchwise_paths(m: GenericMachine, fuel: int) -> Iterator[BranchPath]:
    """Enumerate all maximal labeled paths from the initial configuration.

    There can be exponentially many (one per output branch); for visit
    statistics use config_paths, which collapses label-only branching.
    """
    if fuel <= 0:
        raise ValueError("fuel must be positive")

    def walk(cfg, configs, labels, depth):
        if depth >= fuel:
            yield BranchPath(tuple(configs), tuple(labels), None, "outoffuel")
            return
        try:
            ctx = m.step(cfg)
        except MachineStuck:
            yield BranchPath(tuple(configs), tuple(labels), None, "stuck")
            return
        for step in branch_steps(ctx):
            new_labels = labels + list(step.labels)
            if step.is_config:
                yield from walk(step.target, configs + [step.target], new_labels, depth + 1)
            else:
                yield BranchPath(tuple(configs), tuple(new_labels), step.target, "terminal")

    yield from walk(m.initial, [m.initial], [], 0)


@dataclass(frozen=True)
class ConfigPath:
    """A maximal run over configurations with duplicate successors collapsed."""

    configs: tuple
    outcome: str  # "terminal" | "stuck" | "outoffuel"


def config_paths(m: GenericMachine, fuel: int) -> Iterator[ConfigPath]:
    """Maximal configuration sequences, deduplicating equal successor leaves.

    Two process leaves of one step with equal configurations continue
    identically, so only distinct successors are explored.  Every visit
    profile of branchwise_paths is realized by some path yielded here.
    """
    if fuel <= 0:
        raise ValueError("fuel must be positive")

    def walk(cfg, configs, depth):
        if depth >= fuel:
            yield ConfigPath(tuple(configs), "outoffuel")
            return
        try:
            ctx = m.step(cfg)
        except MachineStuck:
            yield ConfigPath(tuple(configs), "stuck")
            return
        steps = branch_steps(ctx)
        succs = []
        ended = False
        for step in steps:
            if step.is_config:
                if step.target not in succs:
                    succs.append(step.target)
            else:
                ended = True
        if ended or not steps:
            yield ConfigPath(tuple(configs), "terminal")
        for nxt in succs:
            yield from walk(nxt, configs + [nxt], depth + 1)

    yield from walk(m.initial, [m.initial], 0)
