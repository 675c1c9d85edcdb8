"""Input-tree corpora: exhaustive enumeration and seeded random generation."""

from __future__ import annotations

import random
from functools import lru_cache
from typing import Iterator

from .trees import RankedAlphabet, Tree


def all_trees(alph: RankedAlphabet, max_nodes: int) -> Iterator[Tree]:
    """Every tree over the alphabet with at most max_nodes nodes, small first."""

    @lru_cache(maxsize=None)
    def of_size(n: int) -> tuple[Tree, ...]:
        out = []
        for sym, rank in alph.symbols:
            if rank == 0:
                if n == 1:
                    out.append(Tree(sym))
                continue
            for split in _compositions(n - 1, rank):
                for kids in _product_of(tuple(of_size(k) for k in split)):
                    out.append(Tree(sym, kids))
        return tuple(out)

    for n in range(1, max_nodes + 1):
        yield from of_size(n)


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _product_of(pools: tuple[tuple, ...]) -> Iterator[tuple]:
    if not pools:
        yield ()
        return
    for head in pools[0]:
        for rest in _product_of(pools[1:]):
            yield (head,) + rest


def random_tree(alph: RankedAlphabet, max_nodes: int, rng: random.Random) -> Tree:
    """A tree with at most max_nodes nodes; leaf-heavy near the budget."""
    leaves = [s for s, r in alph.symbols if r == 0]
    if not leaves:
        raise ValueError("alphabet has no rank-0 symbol")

    def grow(budget: int) -> tuple[Tree, int]:
        choices = [(s, r) for s, r in alph.symbols if 1 + r <= budget]
        if not choices:
            choices = [(s, 0) for s in leaves]
        sym, rank = rng.choice(choices)
        used = 1
        kids = []
        for i in range(rank):
            remaining_children = rank - i - 1
            sub, u = grow(budget - used - remaining_children)
            kids.append(sub)
            used += u
        return Tree(sym, tuple(kids)), used

    return grow(max_nodes)[0]


def random_corpus(alph: RankedAlphabet, max_nodes: int, count: int, seed: int) -> list[Tree]:
    rng = random.Random(seed)
    return [random_tree(alph, max_nodes, rng) for _ in range(count)]
