"""The linear type grammar shared by actors and lambda-transducers:
A, B ::= o | A -o B | A & B."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .util import TreetransError


class TypeParseError(TreetransError):
    pass


@dataclass(frozen=True)
class Base:
    def __repr__(self):
        return "o"


@dataclass(frozen=True)
class Lolli:
    arg: Any
    res: Any

    def __repr__(self):
        return f"({self.arg!r} -o {self.res!r})"


@dataclass(frozen=True)
class With:
    left: Any
    right: Any

    def __repr__(self):
        return f"({self.left!r} & {self.right!r})"


O = Base()


def lolli_chain(args, res):
    out = res
    for a in reversed(list(args)):
        out = Lolli(a, out)
    return out


def with_power(a, k: int):
    """Right-nested k-fold &; k = 1 is a itself (k = 0 is not a type)."""
    if k < 1:
        raise ValueError("with_power wants k >= 1")
    out = a
    for _ in range(k - 1):
        out = With(a, out)
    return out


def format_type(a) -> str:
    if isinstance(a, Base):
        return "o"
    if isinstance(a, With):
        return f"{_fmt_atom(a.left)} & {_fmt_with(a.right)}"
    if isinstance(a, Lolli):
        return f"{_fmt_with_or_atom(a.arg)} -o {format_type(a.res)}"
    raise TypeParseError(f"not a type: {a!r}")


def _fmt_atom(a) -> str:
    if isinstance(a, Base):
        return "o"
    return f"({format_type(a)})"


def _fmt_with(a) -> str:
    if isinstance(a, With):
        return f"{_fmt_atom(a.left)} & {_fmt_with(a.right)}"
    return _fmt_atom(a)


def _fmt_with_or_atom(a) -> str:
    if isinstance(a, (Base, With)):
        return _fmt_with(a)
    return f"({format_type(a)})"


def parse_type(text: str):
    """Grammar: `o`, `A -o B` (right associative), `A & B` (tighter, right assoc)."""
    toks = _tokenize(text)
    pos = [0]

    def peek():
        return toks[pos[0]] if pos[0] < len(toks) else None

    def eat(tok):
        if peek() != tok:
            raise TypeParseError(f"expected {tok!r}, found {peek()!r} in {text!r}")
        pos[0] += 1

    def parse_arrow():
        left = parse_with()
        if peek() == "-o":
            eat("-o")
            return Lolli(left, parse_arrow())
        return left

    def parse_with():
        left = parse_atom()
        if peek() == "&":
            eat("&")
            return With(left, parse_with())
        return left

    def parse_atom():
        tok = peek()
        if tok == "o":
            eat("o")
            return O
        if tok == "(":
            eat("(")
            inner = parse_arrow()
            eat(")")
            return inner
        raise TypeParseError(f"unexpected {tok!r} in {text!r}")

    out = parse_arrow()
    if pos[0] != len(toks):
        raise TypeParseError(f"trailing tokens in {text!r}")
    return out


def _tokenize(text: str) -> list[str]:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif text.startswith("-o", i):
            out.append("-o")
            i += 2
        elif ch in "()&":
            out.append(ch)
            i += 1
        elif ch == "o" and (i + 1 == len(text) or not text[i + 1].isalnum()):
            out.append("o")
            i += 1
        else:
            raise TypeParseError(f"bad character {ch!r} in type {text!r}")
    return out
