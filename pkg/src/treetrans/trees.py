"""Ranked alphabets, trees, addresses, substitution and branch words.

Node addresses are tuples of 1-based child indices; the empty tuple is the
root.  Tree labels are arbitrary hashable values: plain strings for symbols
of a declared alphabet, richer objects (head triples, state calls, links)
for the intermediate trees the transducer constructions manipulate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping

from .util import TreetransError

UP = "up"
STAY = "stay"

Address = tuple  # tuple of ints, 1-based

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class AlphabetError(TreetransError):
    pass


class TreeParseError(TreetransError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class AddressError(TreetransError):
    pass


@dataclass(frozen=True)
class RankedAlphabet:
    """Finite ranked set with a fixed declaration order."""

    symbols: tuple[tuple[str, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple((n, int(r)) for n, r in self.symbols))
        ranks = {}
        for name, rank in self.symbols:
            if name in ranks:
                raise AlphabetError(f"duplicate symbol {name!r}")
            if rank < 0:
                raise AlphabetError(f"negative rank for {name!r}")
            # plain-string symbols must survive the term grammar; structured
            # labels (pairs, links, state calls) are internal-only
            if isinstance(name, str) and not IDENT_RE.fullmatch(name):
                raise AlphabetError(f"symbol {name!r} is not a valid identifier")
            ranks[name] = rank
        object.__setattr__(self, "_ranks", ranks)

    def rank(self, name: str) -> int:
        try:
            return self._ranks[name]
        except KeyError:
            raise AlphabetError(f"unknown symbol {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._ranks

    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.symbols)

    def of_rank(self, k: int) -> tuple[str, ...]:
        return tuple(n for n, r in self.symbols if r == k)

    @property
    def max_rank(self) -> int:
        return max((r for _, r in self.symbols), default=0)

    def extend(self, extra: Iterable[tuple[str, int]]) -> "RankedAlphabet":
        """Alphabet with extra symbols appended (existing ones must agree)."""
        out = list(self.symbols)
        for name, rank in extra:
            if name in self._ranks:
                if self._ranks[name] != rank:
                    raise AlphabetError(f"rank clash for {name!r}")
            else:
                out.append((name, rank))
        return RankedAlphabet(tuple(out))


def alphabet(spec: Mapping[str, int] | Iterable[tuple[str, int]]) -> RankedAlphabet:
    if isinstance(spec, Mapping):
        return RankedAlphabet(tuple(spec.items()))
    return RankedAlphabet(tuple(spec))


@dataclass(frozen=True)
class Tree:
    label: Any
    children: tuple["Tree", ...] = ()
    size: int = field(init=False, compare=False, repr=False)
    height: int = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "size", 1 + sum(c.size for c in self.children))
        object.__setattr__(
            self, "height", 0 if not self.children else 1 + max(c.height for c in self.children)
        )

    def __repr__(self) -> str:
        if not self.children:
            return f"Tree({self.label!r})"
        return f"Tree({self.label!r}, {self.children!r})"

    def is_leaf(self) -> bool:
        return not self.children

    def addresses(self) -> Iterator[Address]:
        """Dom(t) in depth-first, left-to-right order."""
        stack = [((), self)]
        while stack:
            addr, t = stack.pop()
            yield addr
            for i in range(len(t.children), 0, -1):
                stack.append((addr + (i,), t.children[i - 1]))

    def leaf_addresses(self) -> Iterator[Address]:
        for u in self.addresses():
            if not self.node_at(u).children:
                yield u


def node(label: Any, *children: Tree) -> Tree:
    return Tree(label, tuple(children))


def leaf(label: Any) -> Tree:
    return Tree(label, ())


def subtree_at(t: Tree, u: Address) -> Tree:
    cur = t
    for depth, i in enumerate(u):
        if not 1 <= i <= len(cur.children):
            raise AddressError(f"address {u} leaves the tree at depth {depth}")
        cur = cur.children[i - 1]
    return cur


# convenience alias used by parts of the code that read better with a method name
Tree.node_at = subtree_at


def label_at(t: Tree, u: Address) -> Any:
    return subtree_at(t, u).label


def contains_address(t: Tree, u: Address) -> bool:
    try:
        subtree_at(t, u)
        return True
    except AddressError:
        return False


def parent(u: Address) -> Address:
    if not u:
        raise AddressError("the root has no parent")
    return u[:-1]


def neighbor(u: Address, d: Any) -> Address:
    """Apply a direction (UP, STAY or a 1-based child index) to an address."""
    if d == UP:
        return parent(u)
    if d == STAY:
        return u
    return u + (d,)


def is_ancestor(u: Address, v: Address) -> bool:
    return len(u) <= len(v) and v[: len(u)] == u


def is_antichain(addrs: Iterable[Address]) -> bool:
    addrs = list(addrs)
    for i, u in enumerate(addrs):
        for v in addrs[i + 1:]:
            if is_ancestor(u, v) or is_ancestor(v, u):
                return False
    return True


def substitute(t: Tree, u: Address, r: Tree) -> Tree:
    """Replace the subtree of t rooted at u by r."""
    if not u:
        return r
    i = u[0]
    if not 1 <= i <= len(t.children):
        raise AddressError(f"address component {i} out of range")
    kids = list(t.children)
    kids[i - 1] = substitute(kids[i - 1], u[1:], r)
    return Tree(t.label, tuple(kids))


def simultaneous_substitute(t: Tree, bindings: Mapping[Any, Tree]) -> Tree:
    """Replace every subtree rooted at a bound label by its binding."""
    if t.label in bindings:
        return bindings[t.label]
    if not t.children:
        return t
    return Tree(t.label, tuple(simultaneous_substitute(c, bindings) for c in t.children))


def map_labels(t: Tree, fn) -> Tree:
    return Tree(fn(t.label), tuple(map_labels(c, fn) for c in t.children))


def validate_tree(t: Tree, alph: RankedAlphabet, extra_leaves: Iterable[Any] = ()) -> None:
    """Check that every node's child count matches its label's rank.

    Labels in extra_leaves are accepted as rank-0 leaves (parameters, holes).
    """
    extra = set(extra_leaves)
    stack = [t]
    while stack:
        cur = stack.pop()
        if cur.label in extra:
            if cur.children:
                raise AlphabetError(f"parameter {cur.label!r} must be a leaf")
            continue
        r = alph.rank(cur.label)
        if r != len(cur.children):
            raise AlphabetError(
                f"symbol {cur.label!r} has rank {r} but {len(cur.children)} children"
            )
        stack.extend(cur.children)


# ---------------------------------------------------------------------------
# term grammar:  tree := IDENT | IDENT '(' tree (',' tree)* ')'


def parse_tree(text: str, alph: RankedAlphabet | None = None) -> Tree:
    pos = 0
    n = len(text)

    def skip_ws():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def parse() -> Tree:
        nonlocal pos
        skip_ws()
        m = IDENT_RE.match(text, pos)
        if not m:
            raise TreeParseError("expected identifier", pos)
        name = m.group(0)
        start = pos
        pos = m.end()
        if alph is not None and name not in alph:
            raise TreeParseError(f"unknown symbol {name!r}", start)
        skip_ws()
        children: list[Tree] = []
        if pos < n and text[pos] == "(":
            pos += 1
            children.append(parse())
            skip_ws()
            while pos < n and text[pos] == ",":
                pos += 1
                children.append(parse())
                skip_ws()
            if pos >= n or text[pos] != ")":
                raise TreeParseError("expected ',' or ')'", pos)
            pos += 1
        if alph is not None and alph.rank(name) != len(children):
            raise TreeParseError(
                f"arity mismatch: {name!r} has rank {alph.rank(name)}, got {len(children)}",
                start,
            )
        return Tree(name, tuple(children))

    out = parse()
    skip_ws()
    if pos != n:
        raise TreeParseError("trailing input", pos)
    return out


def format_tree(t: Tree) -> str:
    lbl = t.label if isinstance(t.label, str) else repr(t.label)
    if not t.children:
        return lbl
    return f"{lbl}({','.join(format_tree(c) for c in t.children)})"


def parse_alphabet(text: str) -> RankedAlphabet:
    """One `IDENT ':' NAT` per line; blank lines and #-comments ignored."""
    symbols = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise AlphabetError(f"line {lineno}: expected 'name : rank'")
        name, rank = line.split(":", 1)
        try:
            symbols.append((name.strip(), int(rank.strip())))
        except ValueError:
            raise AlphabetError(f"line {lineno}: bad rank {rank.strip()!r}") from None
    return RankedAlphabet(tuple(symbols))


# ---------------------------------------------------------------------------
# branch words


@dataclass(frozen=True)
class BranchWord:
    """A root-to-leaf branch: (symbol, child index) steps plus the leaf symbol."""

    steps: tuple[tuple[Any, int], ...]
    terminal: Any

    def address(self) -> Address:
        return tuple(i for _, i in self.steps)

    def __len__(self) -> int:
        return len(self.steps)


def branch_words(t: Tree) -> frozenset[BranchWord]:
    out = []

    def walk(cur: Tree, prefix: tuple):
        if not cur.children:
            out.append(BranchWord(prefix, cur.label))
            return
        for i, c in enumerate(cur.children, 1):
            walk(c, prefix + ((cur.label, i),))

    walk(t, ())
    return frozenset(out)


# ---------------------------------------------------------------------------
# running-example alphabet and oracles

EXA_ALPHABET = RankedAlphabet((("a", 2), ("b", 0)))


def pbt(n: int) -> Tree:
    """Perfect binary tree: pbt(0) = b, pbt(n+1) = a(pbt(n), pbt(n))."""
    if n < 0:
        raise ValueError("pbt wants a non-negative integer")
    t = leaf("b")
    for _ in range(n):
        t = node("a", t, t)
    return t


def ones_then_twos_count(t: Tree) -> int:
    """|Dom(t) ∩ 1*2*| — addresses that never turn back left after going right."""

    def down2(cur: Tree) -> int:
        return 1 + (down2(cur.children[1]) if len(cur.children) >= 2 else 0)

    count = 0
    cur = t
    while True:
        count += down2(cur)
        if not cur.children:
            return count
        cur = cur.children[0]


def exa_oracle(t: Tree) -> Tree:
    """Reference for the running example: pbt of the 1*2* address count."""
    validate_tree(t, EXA_ALPHABET)
    return pbt(ones_then_twos_count(t))
