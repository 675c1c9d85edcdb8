"""Affine lambda-calculus with additive pairs, and lambda-transducers.

Terms: variables, alphabet constants (or named definitions), abstraction,
application, pairs, projections.  Variables are affine: an application
splits its free-variable budget, while the two components of a pair share
it.  Tree outputs are encoded with either additive branching (children
grouped in one &-tuple) or multiplicative branching (curried children).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as _cartesian
from typing import Any, Iterator, Mapping, Optional

from .bottomup import BottomUpAutomaton, Recognizer
from .lintypes import Base, Lolli, O, With, format_type, lolli_chain, with_power
from .trees import RankedAlphabet, Tree
from .util import FrozenDict, TreetransError


class LambdaError(TreetransError):
    pass


class LTypeError(LambdaError):
    def __init__(self, rule: str, message: str):
        super().__init__(f"[{rule}] {message}")
        self.rule = rule


class NormalizeOutOfFuel(LambdaError):
    pass


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class Var:
    name: str
    fv: frozenset = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "fv", frozenset((self.name,)))


@dataclass(frozen=True)
class Const:
    name: Any  # alphabet symbol or a definition key
    fv: frozenset = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "fv", frozenset())


@dataclass(frozen=True)
class Lam:
    var: str
    body: Any
    ann: Any = field(default=None, compare=False)  # optional argument-type annotation
    fv: frozenset = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "fv", self.body.fv - {self.var})


@dataclass(frozen=True)
class App:
    fn: Any
    arg: Any
    fv: frozenset = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "fv", self.fn.fv | self.arg.fv)


@dataclass(frozen=True)
class Pair:
    left: Any
    right: Any
    fv: frozenset = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "fv", self.left.fv | self.right.fv)


@dataclass(frozen=True)
class Proj:
    index: int  # 1 or 2
    body: Any
    fv: frozenset = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "fv", self.body.fv)


Term = Any


def apps(fn: Term, *args: Term) -> Term:
    out = fn
    for a in args:
        out = App(out, a)
    return out


def lams(names, body: Term) -> Term:
    out = body
    for n in reversed(list(names)):
        out = Lam(n, out)
    return out


def tuple_term(items: list[Term]) -> Term:
    """Right-nested additive tuple; a 1-tuple is the term itself."""
    if not items:
        raise LambdaError("empty tuple has no encoding")
    out = items[-1]
    for item in reversed(items[:-1]):
        out = Pair(item, out)
    return out


def proj_term(term: Term, index: int, size: int) -> Term:
    """Projection onto component `index` (1-based) of a right-nested size-tuple."""
    if not 1 <= index <= size:
        raise LambdaError(f"projection {index} out of 1..{size}")
    out = term
    for _ in range(index - 1):
        out = Proj(2, out)
    if index < size:
        out = Proj(1, out)
    return out


_FRESH = [0]


def fresh_var(hint: str = "v") -> str:
    _FRESH[0] += 1
    return f"{hint}_{_FRESH[0]}"


def subst(t: Term, x: str, v: Term) -> Term:
    """Capture-avoiding substitution t[x := v]."""
    if x not in t.fv:
        return t
    if isinstance(t, Var):
        return v
    if isinstance(t, Lam):
        if t.var == x:
            return t
        if t.var in v.fv:
            fresh = fresh_var(t.var.split("_")[0])
            renamed = subst(t.body, t.var, Var(fresh))
            return Lam(fresh, subst(renamed, x, v), t.ann)
        return Lam(t.var, subst(t.body, x, v), t.ann)
    if isinstance(t, App):
        return App(subst(t.fn, x, v), subst(t.arg, x, v))
    if isinstance(t, Pair):
        return Pair(subst(t.left, x, v), subst(t.right, x, v))
    if isinstance(t, Proj):
        return Proj(t.index, subst(t.body, x, v))
    return t


def alpha_canonical(t: Term, counter=None, env=None) -> Term:
    """Rename bound variables canonically so alpha-equality is equality."""
    if counter is None:
        counter = [0]
    env = env or {}
    if isinstance(t, Var):
        return Var(env.get(t.name, t.name))
    if isinstance(t, Const):
        return t
    if isinstance(t, Lam):
        counter[0] += 1
        name = f"x{counter[0]}"
        return Lam(name, alpha_canonical(t.body, counter, {**env, t.var: name}), t.ann)
    if isinstance(t, App):
        return App(alpha_canonical(t.fn, counter, env), alpha_canonical(t.arg, counter, env))
    if isinstance(t, Pair):
        return Pair(alpha_canonical(t.left, counter, env), alpha_canonical(t.right, counter, env))
    if isinstance(t, Proj):
        return Proj(t.index, alpha_canonical(t.body, counter, env))
    raise LambdaError(f"not a term: {t!r}")


def alpha_equal(a: Term, b: Term) -> bool:
    return alpha_canonical(a) == alpha_canonical(b)


# ---------------------------------------------------------------------------
# signatures and typechecking


@dataclass(frozen=True)
class Signature:
    alphabet: RankedAlphabet
    mode: str  # "additive" | "multiplicative"

    def __post_init__(self):
        if self.mode not in ("additive", "multiplicative"):
            raise LambdaError(f"unknown branching mode {self.mode!r}")

    def const_type(self, name):
        k = self.alphabet.rank(name)
        if k == 0:
            return O
        if self.mode == "additive":
            return Lolli(with_power(O, k), O)
        return lolli_chain([O] * k, O)


def typecheck(
    sig: Signature,
    term: Term,
    claimed=None,
    context: Mapping | None = None,
    defs: Mapping | None = None,
):
    """Inferred type of an affine term; raises LTypeError with the failing rule.

    `context` types the free affine variables; pairs share it, applications
    split it (a variable used in both halves of an application fails).
    """
    context = dict(context or {})

    def infer(t, ctx) -> tuple[Any, frozenset]:
        if isinstance(t, Var):
            if t.name not in ctx:
                raise LTypeError("var", f"unbound variable {t.name!r}")
            return ctx[t.name], frozenset((t.name,))
        if isinstance(t, Const):
            if defs is not None and t.name in defs:
                return defs.type_of(t.name) if hasattr(defs, "type_of") else defs[t.name][0], frozenset()
            try:
                return sig.const_type(t.name), frozenset()
            except Exception:
                raise LTypeError("const", f"unknown constant {t.name!r}") from None
        if isinstance(t, Lam):
            if t.ann is None:
                # the argument type is not derivable bottom-up; unannotated
                # Lam is checked against an expected arrow, never inferred
                raise _NeedsAnnotation(t)
            if t.var in ctx:
                raise LTypeError("abs", f"shadowed affine variable {t.var!r}")
            body_t, used = infer(t.body, {**ctx, t.var: t.ann})
            return Lolli(t.ann, body_t), used - {t.var}
        if isinstance(t, App):
            head, args = t, []
            while isinstance(head, App):
                args.append(head.arg)
                head = head.fn
            args.reverse()
            if isinstance(head, Lam):
                # beta-redex spine: argument types annotate the binders
                binds = {}
                parts = []
                cur = head
                i = 0
                while i < len(args) and isinstance(cur, Lam):
                    if cur.var in ctx or cur.var in binds:
                        raise LTypeError("abs", f"shadowed affine variable {cur.var!r}")
                    arg_t, arg_used = infer(args[i], ctx)
                    if cur.ann is not None and cur.ann != arg_t:
                        raise LTypeError("app", "redex argument disagrees with annotation")
                    binds[cur.var] = arg_t
                    parts.append(arg_used)
                    cur = cur.body
                    i += 1
                body_t, body_used = infer(cur, {**ctx, **binds})
                parts.append(body_used - set(binds))
                used = frozenset()
                for p in parts:
                    overlap = used & p
                    if overlap:
                        raise LTypeError("app", f"affine variables used twice: {sorted(overlap)}")
                    used |= p
                for extra in args[i:]:
                    if not isinstance(body_t, Lolli):
                        raise LTypeError("app", f"applying a non-function of type {format_type(body_t)}")
                    extra_used = check(extra, body_t.arg, ctx)
                    overlap = used & extra_used
                    if overlap:
                        raise LTypeError("app", f"affine variables used twice: {sorted(overlap)}")
                    used |= extra_used
                    body_t = body_t.res
                return body_t, used
            fn_t, fn_used = infer(t.fn, ctx)
            if not isinstance(fn_t, Lolli):
                raise LTypeError("app", f"applying a non-function of type {format_type(fn_t)}")
            arg_used = check(t.arg, fn_t.arg, ctx)
            overlap = fn_used & arg_used
            if overlap:
                raise LTypeError("app", f"affine variables used twice: {sorted(overlap)}")
            return fn_t.res, fn_used | arg_used
        if isinstance(t, Pair):
            lt_, lu = infer(t.left, ctx)
            rt_, ru = infer(t.right, ctx)
            return With(lt_, rt_), lu | ru
        if isinstance(t, Proj):
            body_t, used = infer(t.body, ctx)
            if not isinstance(body_t, With):
                raise LTypeError("proj", f"projecting from type {format_type(body_t)}")
            return (body_t.left if t.index == 1 else body_t.right), used
        raise LTypeError("term", f"not a term: {t!r}")

    def check(t, expected, ctx) -> frozenset:
        if isinstance(t, Lam):
            if not isinstance(expected, Lolli):
                raise LTypeError("abs", f"lambda against non-arrow type {format_type(expected)}")
            if t.var in ctx:
                raise LTypeError("abs", f"shadowed affine variable {t.var!r}")
            if t.ann is not None and t.ann != expected.arg:
                raise LTypeError("abs", "annotation disagrees with the expected argument type")
            used = check(t.body, expected.res, {**ctx, t.var: expected.arg})
            return used - {t.var}
        if isinstance(t, Pair):
            if not isinstance(expected, With):
                raise LTypeError("pair", f"pair against non-& type {format_type(expected)}")
            lu = check(t.left, expected.left, ctx)
            ru = check(t.right, expected.right, ctx)
            return lu | ru  # components share the context
        got, used = infer(t, ctx)
        if got != expected:
            raise LTypeError(
                "check", f"expected {format_type(expected)}, found {format_type(got)}"
            )
        return used

    try:
        if claimed is not None:
            check(term, claimed, context)
            return claimed
        got, _used = infer(term, context)
        return got
    except _NeedsAnnotation as e:
        raise LTypeError(
            "infer", f"cannot infer a type for {format_term(e.args[0])}; annotate or pass claimed="
        ) from None


class _NeedsAnnotation(Exception):
    pass


class _TypeHole:
    pass


# ---------------------------------------------------------------------------
# normalization


class Defs:
    """Named definitions unfolded on demand during normalization."""

    def __init__(self):
        self._types: dict = {}
        self._bodies: dict = {}

    def define(self, name, typ, body) -> None:
        self._types[name] = typ
        self._bodies[name] = body

    def __contains__(self, name) -> bool:
        return name in self._bodies

    def body(self, name):
        return self._bodies[name]

    def type_of(self, name):
        return self._types[name]

    def __getitem__(self, name):
        return (self._types[name], self._bodies[name])

    def names(self):
        return tuple(self._bodies)


EMPTY_DEFS = Defs()


class _Fuel:
    __slots__ = ("left",)

    def __init__(self, n):
        self.left = n

    def spend(self):
        self.left -= 1
        if self.left < 0:
            raise NormalizeOutOfFuel("out of reduction fuel")


def _whnf(t: Term, defs: Defs, fuel: _Fuel) -> Term:
    while True:
        if isinstance(t, App):
            fn = _whnf(t.fn, defs, fuel)
            if isinstance(fn, Lam):
                fuel.spend()
                t = subst(fn.body, fn.var, t.arg)
            elif isinstance(fn, Const) and fn.name in defs:
                fuel.spend()
                t = App(defs.body(fn.name), t.arg)
            else:
                return App(fn, t.arg)
        elif isinstance(t, Proj):
            body = _whnf(t.body, defs, fuel)
            if isinstance(body, Pair):
                fuel.spend()
                t = body.left if t.index == 1 else body.right
            elif isinstance(body, Const) and body.name in defs:
                fuel.spend()
                t = Proj(t.index, defs.body(body.name))
            else:
                return Proj(t.index, body)
        else:
            return t


def _nf(t: Term, defs: Defs, fuel: _Fuel) -> Term:
    t = _whnf(t, defs, fuel)
    if isinstance(t, Lam):
        return Lam(t.var, _nf(t.body, defs, fuel), t.ann)
    if isinstance(t, App):
        return App(_nf(t.fn, defs, fuel), _nf(t.arg, defs, fuel))
    if isinstance(t, Pair):
        return Pair(_nf(t.left, defs, fuel), _nf(t.right, defs, fuel))
    if isinstance(t, Proj):
        return Proj(t.index, _nf(t.body, defs, fuel))
    return t


def step_lo(t: Term, defs: Defs = EMPTY_DEFS) -> Optional[Term]:
    """One leftmost-outermost reduction step (beta, projection, or unfold)."""
    if isinstance(t, App):
        if isinstance(t.fn, Lam):
            return subst(t.fn.body, t.fn.var, t.arg)
        if isinstance(t.fn, Const) and t.fn.name in defs:
            return App(defs.body(t.fn.name), t.arg)
        s = step_lo(t.fn, defs)
        if s is not None:
            return App(s, t.arg)
        s = step_lo(t.arg, defs)
        return None if s is None else App(t.fn, s)
    if isinstance(t, Proj):
        if isinstance(t.body, Pair):
            return t.body.left if t.index == 1 else t.body.right
        if isinstance(t.body, Const) and t.body.name in defs:
            return Proj(t.index, defs.body(t.body.name))
        s = step_lo(t.body, defs)
        return None if s is None else Proj(t.index, s)
    if isinstance(t, Lam):
        s = step_lo(t.body, defs)
        return None if s is None else Lam(t.var, s, t.ann)
    if isinstance(t, Pair):
        s = step_lo(t.left, defs)
        if s is not None:
            return Pair(s, t.right)
        s = step_lo(t.right, defs)
        return None if s is None else Pair(t.left, s)
    return None


def step_ri(t: Term, defs: Defs = EMPTY_DEFS) -> Optional[Term]:
    """One rightmost-innermost reduction step."""
    if isinstance(t, Lam):
        s = step_ri(t.body, defs)
        return None if s is None else Lam(t.var, s, t.ann)
    if isinstance(t, Pair):
        s = step_ri(t.right, defs)
        if s is not None:
            return Pair(t.left, s)
        s = step_ri(t.left, defs)
        return None if s is None else Pair(s, t.right)
    if isinstance(t, App):
        s = step_ri(t.arg, defs)
        if s is not None:
            return App(t.fn, s)
        s = step_ri(t.fn, defs)
        if s is not None:
            return App(s, t.arg)
        if isinstance(t.fn, Lam):
            return subst(t.fn.body, t.fn.var, t.arg)
        if isinstance(t.fn, Const) and t.fn.name in defs:
            return App(defs.body(t.fn.name), t.arg)
        return None
    if isinstance(t, Proj):
        s = step_ri(t.body, defs)
        if s is not None:
            return Proj(t.index, s)
        if isinstance(t.body, Pair):
            return t.body.left if t.index == 1 else t.body.right
        if isinstance(t.body, Const) and t.body.name in defs:
            return Proj(t.index, defs.body(t.body.name))
        return None
    return None


def normalize(t: Term, defs: Defs = EMPTY_DEFS, fuel: int = 10**6, strategy: str = "lo") -> Term:
    """Unique beta-normal form (types guarantee existence; fuel is a guard)."""
    if strategy == "lo":
        return _nf(t, defs, _Fuel(fuel))
    stepper = step_ri if strategy == "ri" else step_lo
    f = _Fuel(fuel)
    while True:
        s = stepper(t, defs)
        if s is None:
            return t
        f.spend()
        t = s


# ---------------------------------------------------------------------------
# tree encodings (Claim-style bijections, per branching mode)


def encode_tree(t: Tree, sig: Signature) -> Term:
    k = len(t.children)
    kids = [encode_tree(c, sig) for c in t.children]
    if k == 0:
        return Const(t.label)
    if sig.mode == "additive":
        return App(Const(t.label), tuple_term(kids))
    return apps(Const(t.label), *kids)


def decode_tree(term: Term, sig: Signature) -> Tree:
    if isinstance(term, Const):
        if sig.alphabet.rank(term.name) != 0:
            raise LambdaError(f"constant {term.name!r} not fully applied")
        return Tree(term.name)
    if sig.mode == "additive":
        if not (isinstance(term, App) and isinstance(term.fn, Const)):
            raise LambdaError(f"not a canonical output: {format_term(term)}")
        k = sig.alphabet.rank(term.fn.name)
        parts = _split_tuple(term.arg, k)
        return Tree(term.fn.name, tuple(decode_tree(p, sig) for p in parts))
    spine = []
    cur = term
    while isinstance(cur, App):
        spine.append(cur.arg)
        cur = cur.fn
    if not isinstance(cur, Const):
        raise LambdaError(f"not a canonical output: {format_term(term)}")
    spine.reverse()
    if sig.alphabet.rank(cur.name) != len(spine):
        raise LambdaError(f"constant {cur.name!r} applied to {len(spine)} arguments")
    return Tree(cur.name, tuple(decode_tree(p, sig) for p in spine))


def _split_tuple(term: Term, k: int) -> list[Term]:
    if k <= 1:
        return [term]
    if not isinstance(term, Pair):
        raise LambdaError(f"expected a {k}-tuple, found {format_term(term)}")
    return [term.left] + _split_tuple(term.right, k - 1)


# ---------------------------------------------------------------------------
# printing / parsing (ASCII term grammar)


def format_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return t.name if isinstance(t.name, str) else f"#{t.name!r}"
    if isinstance(t, Lam):
        return f"\\{t.var}. {format_term(t.body)}"
    if isinstance(t, App):
        return f"{_fmt_fn(t.fn)} {_fmt_atom(t.arg)}"
    if isinstance(t, Pair):
        return f"<{format_term(t.left)}, {format_term(t.right)}>"
    if isinstance(t, Proj):
        return f"pi{t.index} {_fmt_atom(t.body)}"
    raise LambdaError(f"not a term: {t!r}")


def _fmt_fn(t: Term) -> str:
    if isinstance(t, (Lam, Proj)):
        return f"({format_term(t)})"
    return format_term(t)


def _fmt_atom(t: Term) -> str:
    if isinstance(t, (Var, Const, Pair)):
        return format_term(t)
    return f"({format_term(t)})"


def parse_term(text: str, constants=()) -> Term:
    """ASCII grammar: `\\x. t`, juxtaposition, `<t, u>`, `pi1 t`, `pi2 t`."""
    toks = _tokenize_term(text)
    pos = [0]
    consts = set(constants)

    def peek():
        return toks[pos[0]] if pos[0] < len(toks) else None

    def eat(tok=None):
        cur = peek()
        if tok is not None and cur != tok:
            raise LambdaError(f"expected {tok!r}, found {cur!r} in {text!r}")
        pos[0] += 1
        return cur

    def parse_t(bound):
        if peek() == "\\":
            eat("\\")
            name = eat()
            if not isinstance(name, tuple):
                raise LambdaError(f"expected a variable after \\ in {text!r}")
            eat(".")
            return Lam(name[1], parse_t(bound | {name[1]}))
        return parse_app(bound)

    def parse_app(bound):
        out = parse_atom(bound)
        while True:
            nxt = peek()
            if nxt in ("(", "<") or isinstance(nxt, tuple) or nxt in ("pi1", "pi2"):
                out = App(out, parse_atom(bound))
            else:
                return out

    def parse_atom(bound):
        nxt = peek()
        if nxt == "(":
            eat("(")
            inner = parse_t(bound)
            eat(")")
            return inner
        if nxt == "<":
            eat("<")
            left = parse_t(bound)
            eat(",")
            right = parse_t(bound)
            eat(">")
            return Pair(left, right)
        if nxt in ("pi1", "pi2"):
            eat()
            return Proj(int(nxt[-1]), parse_atom(bound))
        if isinstance(nxt, tuple):
            eat()
            name = nxt[1]
            if name in bound:
                return Var(name)
            if name in consts:
                return Const(name)
            return Var(name)
        raise LambdaError(f"unexpected {nxt!r} in {text!r}")

    out = parse_t(frozenset())
    if pos[0] != len(toks):
        raise LambdaError(f"trailing tokens in {text!r}")
    return out


def _tokenize_term(text: str) -> list:
    import re

    out: list = []
    i = 0
    ident = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "\\.(),<>":
            out.append(ch)
            i += 1
            continue
        m = ident.match(text, i)
        if not m:
            raise LambdaError(f"bad character {ch!r} in term {text!r}")
        word = m.group(0)
        i = m.end()
        if word in ("pi1", "pi2"):
            out.append(word)
        else:
            out.append(("ident", word))
    return out


# ---------------------------------------------------------------------------
# lambda-transducers


@dataclass(frozen=True)
class LambdaTransducer:
    memory_type: Any
    mode: str  # branching mode of the output constants
    input_alphabet: RankedAlphabet
    output_alphabet: RankedAlphabet
    transitions: Mapping  # input symbol -> term of type A^{ox rank} -o A
    output: Term  # term of type A -o o
    defs: Defs = field(default_factory=Defs, compare=False)

    def signature(self) -> Signature:
        return Signature(self.output_alphabet, self.mode)

    def transition_type(self, sym) -> Any:
        return lolli_chain([self.memory_type] * self.input_alphabet.rank(sym), self.memory_type)

    def validate_types(self) -> None:
        sig = self.signature()
        for sym, _rank in self.input_alphabet.symbols:
            typecheck(sig, self.transitions[sym], self.transition_type(sym), defs=self.defs)
        typecheck(sig, self.output, Lolli(self.memory_type, O), defs=self.defs)


def fold_term(lt: LambdaTransducer, t: Tree) -> Term:
    return apps(lt.transitions[t.label], *(fold_term(lt, c) for c in t.children))


def run_lambda_transducer(lt: LambdaTransducer, t: Tree, fuel: int = 10**6) -> Tree:
    term = App(lt.output, fold_term(lt, t))
    nf = normalize(term, lt.defs, fuel)
    return decode_tree(nf, lt.signature())


def identity_lambda_transducer(alph: RankedAlphabet, mode: str = "multiplicative") -> LambdaTransducer:
    """Memory o; each transition is the constant applied to its children."""
    sig = Signature(alph, mode)
    transitions = {}
    for sym, rank in alph.symbols:
        names = [fresh_var("x") for _ in range(rank)]
        if rank == 0:
            body = Const(sym)
        elif mode == "additive":
            body = App(Const(sym), tuple_term([Var(n) for n in names]))
        else:
            body = apps(Const(sym), *[Var(n) for n in names])
        term = body
        for n in reversed(names):
            term = Lam(n, term, ann=O)
        transitions[sym] = term
    out_v = fresh_var("x")
    return LambdaTransducer(
        memory_type=O,
        mode=mode,
        input_alphabet=alph,
        output_alphabet=alph,
        transitions=transitions,
        output=Lam(out_v, Var(out_v)),
    )


def exa_lambda_transducer() -> LambdaTransducer:
    """The running example: memory o & (o -o o), additive branching.

    The two memory components behave like the rank-0 and rank-1 states of
    the corresponding macro tree transducer: the rank-1 behavior of the
    second child is applied to the doubled rank-0 behavior of the first.
    """
    from .trees import EXA_ALPHABET

    a, b = Const("a"), Const("b")
    mem = With(O, Lolli(O, O))
    t_b = Pair(App(a, Pair(b, b)), Lam("y", App(a, Pair(Var("y"), Var("y"))), ann=O))
    x1, x2, y = Var("x1"), Var("x2"), Var("y")
    t_a = Lam(
        "x1",
        Lam(
            "x2",
            Pair(
                App(Proj(2, x2), App(a, Pair(Proj(1, x1), Proj(1, x1)))),
                Lam("y", App(Proj(2, x2), App(a, Pair(y, y))), ann=O),
            ),
            ann=mem,
        ),
        ann=mem,
    )
    return LambdaTransducer(
        memory_type=mem,
        mode="additive",
        input_alphabet=EXA_ALPHABET,
        output_alphabet=EXA_ALPHABET,
        transitions={"a": t_a, "b": t_b},
        output=Lam("x", Proj(1, Var("x"))),
    )


def precompose_lambda(outer: LambdaTransducer, inner: LambdaTransducer) -> LambdaTransducer:
    """Transducer for (outer after inner); inner must branch multiplicatively.

    Substituting outer's transition terms for inner's output constants sends
    the type of each constant to the type of its transition term, which only
    works because the inner encoding is curried.
    """
    if inner.mode != "multiplicative":
        raise LambdaError("precomposition needs a multiplicative inner transducer")
    for sym, rank in inner.output_alphabet.symbols:
        if sym not in outer.input_alphabet or outer.input_alphabet.rank(sym) != rank:
            raise LambdaError(f"alphabet mismatch on {sym!r}")
    if inner.defs.names() or outer.defs.names():
        raise LambdaError("precomposition of transducers with definitions is unsupported")

    def plug(term: Term) -> Term:
        if isinstance(term, Const) and term.name in outer.transitions:
            return outer.transitions[term.name]
        if isinstance(term, Lam):
            ann = None if term.ann is None else _subst_base(term.ann, outer.memory_type)
            return Lam(term.var, plug(term.body), ann)
        if isinstance(term, App):
            return App(plug(term.fn), plug(term.arg))
        if isinstance(term, Pair):
            return Pair(plug(term.left), plug(term.right))
        if isinstance(term, Proj):
            return Proj(term.index, plug(term.body))
        return term

    memory = _subst_base(inner.memory_type, outer.memory_type)
    x = fresh_var("x")
    # plugging can nest the two transducers' binder names; rename apart
    return LambdaTransducer(
        memory_type=memory,
        mode=outer.mode,
        input_alphabet=inner.input_alphabet,
        output_alphabet=outer.output_alphabet,
        transitions={sym: alpha_canonical(plug(term)) for sym, term in inner.transitions.items()},
        output=alpha_canonical(Lam(x, App(outer.output, App(plug(inner.output), Var(x)), ), ann=memory)),
    )


def _subst_base(typ, replacement):
    if isinstance(typ, Base):
        return replacement
    if isinstance(typ, Lolli):
        return Lolli(_subst_base(typ.arg, replacement), _subst_base(typ.res, replacement))
    if isinstance(typ, With):
        return With(_subst_base(typ.left, replacement), _subst_base(typ.right, replacement))
    raise LambdaError(f"not a type: {typ!r}")


# ---------------------------------------------------------------------------
# compiling weight-reducing Hennie machines to lambda-transducers


@dataclass(frozen=True)
class TransKey:
    """Name of one generated transition definition (sym, mem, budgets, k)."""

    sym: Any
    mem: Any
    ns: tuple
    k: int


class LazyDefs(Defs):
    """Definitions whose bodies are built on first unfolding."""

    def __init__(self, builder, typer):
        super().__init__()
        self._builder = builder
        self._typer = typer

    def __contains__(self, name) -> bool:
        return isinstance(name, TransKey)

    def body(self, name):
        if name not in self._bodies:
            self._bodies[name] = self._builder(name)
            self._types[name] = self._typer(name)
        return self._bodies[name]

    def type_of(self, name):
        if name not in self._types:
            self.body(name)
        return self._types[name]

    def __getitem__(self, name):
        return (self.type_of(name), self.body(name))


class HennieToLambda:
    """Continuation-passing truncated-behavior compiler.

    The machine must be stay-free, initializer-free and weight-reducing;
    its semantics should be total (cap_weight_reducing provides all three).
    A budget of n allows n upward exits from the current subtree; budgets
    above the weight of the current memory value lose nothing.
    """

    def __init__(self, machine, default_leaf=None):
        from .hennie import infer_memory_order, memory_weights

        if machine.allow_stay:
            raise LambdaError("eliminate stays before compiling")
        if machine.initializer is not None:
            raise LambdaError("inline the initializer before compiling")
        if infer_memory_order(machine) is None:
            raise LambdaError("machine is not weight-reducing")
        self.m = machine
        self.omega = memory_weights(machine)
        self.depth = len(machine.memory)
        self.q_order = tuple(machine.states)
        leaves = machine.output_alphabet.of_rank(0)
        if default_leaf is None:
            default_leaf = leaves[0]
        if default_leaf not in leaves:
            raise LambdaError(f"default leaf {default_leaf!r} must have rank 0")
        self.gamma0 = default_leaf
        self.sig = Signature(machine.output_alphabet, "additive")
        self.defs = LazyDefs(self._build, self._type_of)
        self._a_types: dict = {}

    # types ---------------------------------------------------------------
    def a_type(self, n: int):
        if n not in self._a_types:
            oq = with_power(O, len(self.q_order))
            self._a_types[n] = oq if n == 0 else Lolli(Lolli(self.a_type(n - 1), oq), oq)
        return self._a_types[n]

    def _type_of(self, key: TransKey):
        args = [self.a_type(n) for n in key.ns]
        return lolli_chain(args, self.a_type(key.k))

    # terms ----------------------------------------------------------------
    def _proj_q(self, q, term: Term) -> Term:
        return proj_term(term, self.q_order.index(q) + 1, len(self.q_order))

    def _q_tuple(self, items: list[Term]) -> Term:
        return tuple_term(items)

    def _build(self, key: TransKey) -> Term:
        from .hennie import Head
        from .trees import STAY, UP

        sym, mem, ns, k = key.sym, key.mem, key.ns, key.k
        rank = self.m.input_alphabet.rank(sym)
        zs = [f"z{i}" for i in range(1, rank + 1)]
        x = "x"

        def head_term(h: Head) -> Term:
            if h.dir == STAY:
                raise LambdaError("stay instruction in compiled machine")
            if h.dir == UP:
                if k == 0:
                    return Const(self.gamma0)
                cont = apps(Const(TransKey(sym, h.mem, ns, k - 1)), *[Var(z) for z in zs])
                return self._proj_q(h.state, App(Var(x), cont))
            i = h.dir
            if ns[i - 1] == 0:
                return self._proj_q(h.state, Var(zs[i - 1]))
            znew = f"znew{i}"
            ns2 = ns[: i - 1] + (ns[i - 1] - 1,) + ns[i:]
            inner_args = [Var(z) for z in zs]
            inner_args[i - 1] = Var(znew)
            if k >= 1:
                inner_args.append(Var(x))
            cont = Lam(znew, apps(Const(TransKey(sym, h.mem, ns2, k)), *inner_args))
            return self._proj_q(h.state, App(Var(zs[i - 1]), cont))

        def encode_rhs(nd: Tree) -> Term:
            if isinstance(nd.label, Head):
                return head_term(nd.label)
            kids = [encode_rhs(c) for c in nd.children]
            if not kids:
                return Const(nd.label)
            return App(Const(nd.label), tuple_term(kids))

        components = []
        for q in self.q_order:
            rhs = self.m.rule(q, sym, mem)
            components.append(Const(self.gamma0) if rhs is None else encode_rhs(rhs))
        body = self._q_tuple(components)
        names = list(zs) + ([x] if k >= 1 else [])
        return lams(names, body)

    # the transducer ---------------------------------------------------------
    def transducer(self) -> LambdaTransducer:
        n = self.depth
        transitions = {
            sym: Const(TransKey(sym, self.m.top, (n,) * rank, n))
            for sym, rank in self.m.input_alphabet.symbols
        }
        z, znew = "z", "znew"
        bottom = Lam(znew, self._q_tuple([Const(self.gamma0)] * len(self.q_order)))
        output = Lam(z, self._proj_q(self.m.init_state, App(Var(z), bottom)))
        return LambdaTransducer(
            memory_type=self.a_type(n),
            mode="additive",
            input_alphabet=self.m.input_alphabet,
            output_alphabet=self.m.output_alphabet,
            transitions=transitions,
            output=output,
            defs=self.defs,
        )

    # representation sets ------------------------------------------------------
    def _decompose_spine(self, term: Term):
        args = []
        while isinstance(term, App):
            args.append(term.arg)
            term = term.fn
        args.reverse()
        if isinstance(term, Const) and isinstance(term.name, TransKey):
            return term.name, args
        return None, args

    def in_subtree_reps(self, term: Term, t: Tree, u: tuple, mem_map: Mapping, n: int) -> bool:
        mem = mem_map[u]
        if n < self.omega[mem]:
            return False
        key, args = self._decompose_spine(term)
        if key is None or key.sym != t.node_at(u).label or key.mem != mem or key.k != n:
            return False
        if len(args) != len(key.ns) or len(args) != len(t.node_at(u).children):
            return False
        return all(
            self.in_subtree_reps(arg, t, u + (i,), mem_map, key.ns[i - 1])
            for i, arg in enumerate(args, 1)
        )

    def in_context_reps(self, term: Term, t: Tree, u: tuple, mem_map: Mapping, k: int) -> bool:
        if u == ():
            return self._is_bottom_continuation(term)
        if not isinstance(term, Lam):
            return False
        x = term.var
        key, args = self._decompose_spine(term.body)
        v, i = u[:-1], u[-1]
        node = t.node_at(v)
        if key is None or key.sym != node.label or key.mem != mem_map[v]:
            return False
        if key.k < self.omega[mem_map[v]] or len(args) != len(node.children) + 1:
            return False
        if key.ns[i - 1] != k - 1:
            return False
        if args[i - 1] != Var(x):
            return False
        for j, arg in enumerate(args[:-1], 1):
            if j == i:
                continue
            if not self.in_subtree_reps(arg, t, v + (j,), mem_map, key.ns[j - 1]):
                return False
        return self.in_context_reps(args[-1], t, v, mem_map, key.k)

    def _is_bottom_continuation(self, term: Term) -> bool:
        if not isinstance(term, Lam):
            return False
        want = self._q_tuple([Const(self.gamma0)] * len(self.q_order))
        return term.body == want

    def in_config_reps(self, term: Term, t: Tree, cfg) -> bool:
        index = 1
        while isinstance(term, Proj):
            if term.index == 2:
                index += 1
            term = term.body
        if not (isinstance(term, App)):
            return False
        if self.q_order.index(cfg.state) + 1 != index:
            return False
        sub, cont = term.fn, term.arg
        mem_map = {w: cfg.mem.get(w, self.m.top) for w in t.addresses()}
        key, _ = self._decompose_spine(sub)
        if key is None:
            return False
        k = key.k
        if k < 1:
            return False
        return self.in_subtree_reps(sub, t, cfg.pos, mem_map, k) and self.in_context_reps(
            cont, t, cfg.pos, mem_map, k
        )


def compile_hennie_to_lambda(machine, default_leaf=None) -> LambdaTransducer:
    return HennieToLambda(machine, default_leaf).transducer()


def validate_simulation(comp: HennieToLambda, t: Tree, max_machine_steps: int, reduce_budget: int = 400) -> int:
    """Step the machine and the term side by side; count matched steps.

    Every machine step from a represented configuration must be matched by
    a beta-reduction sequence landing in a representation of the successor
    global state (output prefix emitted plus represented configurations).
    """
    from .generic import MachineStuck, Proc, branch_steps
    from .hennie import hennie_generic

    gm = hennie_generic(comp.m, t)
    lt = comp.transducer()
    start = step_lo(App(lt.output, fold_term(lt, t)), comp.defs)
    if not comp.in_config_reps(start, t, gm.initial):
        raise LambdaError("initial term does not represent the initial configuration")
    frontier = [(gm.initial, start)]
    validated = 0
    while frontier and validated < max_machine_steps:
        cfg, term = frontier.pop(0)
        try:
            ctx = gm.step(cfg)
        except MachineStuck:
            continue
        match = _match_term_to_context(comp, term, ctx, t, reduce_budget)
        if match is None:
            raise LambdaError(f"no beta sequence matches the machine step at {cfg!r}")
        validated += 1
        frontier.extend(match)
    return validated


class _NoMatch(Exception):
    pass


def _match_term_to_context(comp: HennieToLambda, term: Term, ctx: Tree, t: Tree, budget: int):
    """Match the term against the step's output prefix, reducing each mismatching
    subterm locally (a global leftmost strategy could rewrite inside an
    already-represented sibling and destroy its shape)."""
    from .generic import Proc

    out: list = []

    def settle(tm: Term, accept):
        for _ in range(budget):
            if accept(tm):
                return tm
            nxt = step_lo(tm, comp.defs)
            if nxt is None:
                raise _NoMatch()
            tm = nxt
        raise _NoMatch()

    def go(tm: Term, nd: Tree):
        if isinstance(nd.label, Proc):
            tm = settle(tm, lambda v: comp.in_config_reps(v, t, nd.label.config))
            out.append((nd.label.config, tm))
            return
        if not nd.children:
            settle(tm, lambda v: v == Const(nd.label))
            return
        def is_node(v):
            return (
                isinstance(v, App)
                and v.fn == Const(nd.label)
                and _split_tuple_safe(v.arg, len(nd.children)) is not None
            )
        tm = settle(tm, is_node)
        parts = _split_tuple_safe(tm.arg, len(nd.children))
        for p, c in zip(parts, nd.children):
            go(p, c)

    try:
        go(term, ctx)
        return out
    except _NoMatch:
        return None


def _split_tuple_safe(term: Term, k: int):
    if k <= 1:
        return [term]
    if not isinstance(term, Pair):
        return None
    rest = _split_tuple_safe(term.right, k - 1)
    return None if rest is None else [term.left] + rest


# ---------------------------------------------------------------------------
# finite denotational semantics


class CarrierOverflow(LambdaError):
    pass


@dataclass(frozen=True)
class Closure:
    lam: Any
    env: FrozenDict
    evaluator: Any = field(compare=False, repr=False)

    def __hash__(self):
        return hash((self.lam, self.env))


@dataclass(frozen=True)
class FiniteInterpretation:
    """Finite carrier for the base type plus values for the constants."""

    base: tuple
    constants: Mapping
    cap: int = 10**6


class Evaluator:
    def __init__(self, interp: FiniteInterpretation, defs: Defs = EMPTY_DEFS):
        self.interp = interp
        self.defs = defs

    def eval(self, term: Term, env: FrozenDict = FrozenDict()) -> Any:
        if isinstance(term, Var):
            return env[term.name]
        if isinstance(term, Const):
            if term.name in self.defs:
                return self.eval(self.defs.body(term.name), FrozenDict())
            return self.interp.constants[term.name]
        if isinstance(term, Lam):
            small = FrozenDict({k: v for k, v in env.items() if k in term.fv})
            return Closure(term, small, self)
        if isinstance(term, App):
            return self.apply(self.eval(term.fn, env), self.eval(term.arg, env))
        if isinstance(term, Pair):
            return ("P", self.eval(term.left, env), self.eval(term.right, env))
        if isinstance(term, Proj):
            v = self.eval(term.body, env)
            return v[term.index]
        raise LambdaError(f"not a term: {term!r}")

    def apply(self, f: Any, a: Any) -> Any:
        if isinstance(f, FrozenDict):
            return f[a]
        if isinstance(f, Closure):
            return f.evaluator.eval(f.lam.body, f.env.set(f.lam.var, a))
        raise LambdaError(f"not a function value: {f!r}")


def finite_eval(interp: FiniteInterpretation, term: Term, defs: Defs = EMPTY_DEFS) -> Any:
    """Compositional set-theoretic value of a closed term (call-by-value)."""
    return Evaluator(interp, defs).eval(term)


def carrier(typ, interp: FiniteInterpretation):
    """All elements of a type's carrier; function spaces as explicit tables."""
    if isinstance(typ, Base):
        return tuple(interp.base)
    if isinstance(typ, With):
        lc, rc = carrier(typ.left, interp), carrier(typ.right, interp)
        _cap_check(len(lc) * len(rc), interp)
        return tuple(("P", a, b) for a in lc for b in rc)
    if isinstance(typ, Lolli):
        ac, rc = carrier(typ.arg, interp), carrier(typ.res, interp)
        _cap_check(len(rc) ** len(ac) if ac else 1, interp)
        _cap_check(len(ac) * max(len(rc), 1), interp)
        out = []
        for values in _cartesian(rc, repeat=len(ac)):
            out.append(FrozenDict(dict(zip(ac, values))))
            _cap_check(len(out) * max(len(ac), 1), interp)
        return tuple(out)
    raise LambdaError(f"not a type: {typ!r}")


def _cap_check(n: int, interp: FiniteInterpretation):
    if n > interp.cap:
        raise CarrierOverflow(f"carrier of size ~{n} exceeds the cap {interp.cap}")


def tabulate(value: Any, typ, evaluator: Evaluator) -> Any:
    """Extensional table of a semantic value (canonical, hashable)."""
    if isinstance(typ, Base):
        return value
    if isinstance(typ, With):
        return ("P", tabulate(value[1], typ.left, evaluator), tabulate(value[2], typ.right, evaluator))
    if isinstance(typ, Lolli):
        args = carrier(typ.arg, evaluator.interp)
        return FrozenDict(
            {a: tabulate(evaluator.apply(value, a), typ.res, evaluator) for a in args}
        )
    raise LambdaError(f"not a type: {typ!r}")


def recognizer_interpretation(rec: Recognizer, sig: Signature, cap: int = 10**6) -> FiniteInterpretation:
    """Interpret the base type as the recognizer's state set and each output
    constant as its transition, curried or tupled per the branching mode."""
    states = tuple(rec.automaton.states)
    interp = FiniteInterpretation(states, {}, cap)
    consts = {}
    for sym, rank in sig.alphabet.symbols:
        if rank == 0:
            consts[sym] = rec.automaton.step(sym, ())
        elif sig.mode == "additive":
            arg_t = with_power(O, rank)
            table = {}
            for v in carrier(arg_t, interp):
                table[v] = rec.automaton.step(sym, tuple(_flatten_pairs(v, rank)))
            consts[sym] = FrozenDict(table)
        else:
            consts[sym] = _curried_table(rec, sym, rank, states, ())
    return FiniteInterpretation(states, consts, cap)


def _flatten_pairs(v, k: int):
    if k == 1:
        return [v]
    return [v[1]] + _flatten_pairs(v[2], k - 1)


def _curried_table(rec: Recognizer, sym, remaining: int, states, acc: tuple):
    if remaining == 0:
        return rec.automaton.step(sym, acc)
    return FrozenDict(
        {s: _curried_table(rec, sym, remaining - 1, states, acc + (s,)) for s in states}
    )


def inverse_regular(lt: LambdaTransducer, rec: Recognizer, accepting, cap: int = 10**6) -> Recognizer:
    """Automaton accepting t iff the transducer's output lies in the language.

    The returned recognizer's state on t is the extensional table of the
    fold's denotation; acceptance evaluates the output term and rec's phi.
    """
    interp = recognizer_interpretation(rec, lt.signature(), cap)
    ev = Evaluator(interp, lt.defs)
    t_vals = {sym: ev.eval(lt.transitions[sym]) for sym, _ in lt.input_alphabet.symbols}
    a_type = lt.memory_type

    states: list = []
    delta: dict = {}
    frontier = True
    while frontier:
        frontier = False
        for sym, rank in lt.input_alphabet.symbols:
            pool = list(states)
            for combo in _cartesian(pool, repeat=rank):
                if (sym, combo) in delta:
                    continue
                val = t_vals[sym]
                for arg in combo:
                    val = ev.apply(val, arg)
                tab = tabulate(val, a_type, ev)
                delta[(sym, combo)] = tab
                if tab not in states:
                    states.append(tab)
                    _cap_check(len(states), interp)
                frontier = True
    out_val = ev.eval(lt.output)
    accepting = set(accepting)
    phi = {}
    for s in states:
        res = ev.apply(out_val, s)
        phi[s] = rec.phi[res] in accepting
    return Recognizer(BottomUpAutomaton(tuple(states), delta), phi)
