"""Deterministic bottom-up tree automata, recognizers and relabelers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from .trees import RankedAlphabet, Tree
from .util import TreetransError


class AutomatonError(TreetransError):
    pass


@dataclass(frozen=True)
class BottomUpAutomaton:
    """States plus per-symbol transitions delta[(sym, child states)] -> state."""

    states: tuple
    delta: Mapping  # (sym, tuple of states) -> state

    def step(self, sym: Any, child_states: tuple) -> Any:
        try:
            return self.delta[(sym, tuple(child_states))]
        except KeyError:
            raise AutomatonError(f"no transition for {sym!r} on {child_states!r}") from None

    def value(self, t: Tree) -> Any:
        return self.step(t.label, tuple(self.value(c) for c in t.children))


def total_automaton(
    alph: RankedAlphabet, states: Iterable, fn
) -> BottomUpAutomaton:
    """Tabulate delta[sym](children...) = fn(sym, children) over all tuples."""
    from itertools import product

    states = tuple(states)
    delta = {}
    for name, rank in alph.symbols:
        for combo in product(states, repeat=rank):
            delta[(name, combo)] = fn(name, combo)
    return BottomUpAutomaton(states, delta)


@dataclass(frozen=True)
class Recognizer:
    """Bottom-up automaton with an output map phi on states."""

    automaton: BottomUpAutomaton
    phi: Mapping

    def classify(self, t: Tree) -> Any:
        return self.phi[self.automaton.value(t)]


@dataclass(frozen=True)
class Relabeler:
    """Bottom-up automaton with a rank-preserving relabeling map rho."""

    automaton: BottomUpAutomaton
    rho: Mapping  # (sym, state) -> new sym
    input_alphabet: RankedAlphabet
    output_alphabet: RankedAlphabet

    def apply(self, t: Tree) -> Tree:
        def go(cur: Tree) -> tuple[Tree, Any]:
            done = [go(c) for c in cur.children]
            state = self.automaton.step(cur.label, tuple(s for _, s in done))
            new = Tree(self.rho[(cur.label, state)], tuple(c for c, _ in done))
            return new, state

        return go(t)[0]


def identity_relabeler(alph: RankedAlphabet) -> Relabeler:
    auto = total_automaton(alph, ("*",), lambda sym, kids: "*")
    rho = {(name, "*"): name for name, _ in alph.symbols}
    return Relabeler(auto, rho, alph, alph)


class LazyDelta(dict):
    """Transition table computed on first use; for huge product automata."""

    def __init__(self, fn):
        super().__init__()
        self._fn = fn

    def __missing__(self, key):
        value = self._fn(key)
        self[key] = value
        return value
