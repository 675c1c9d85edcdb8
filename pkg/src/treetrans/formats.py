"""Text formats for machines, MTTs, actors and lambda-transducers.

All formats are line-oriented: `key: value` headers followed by one rule
per line; `#` starts a comment.  Tree terms use the shared term grammar;
machine right-hand sides may use `[state, memory, direction]` leaves with
direction `up`, `stay` or a child index.
"""

from __future__ import annotations

import re
from typing import Any

from .actors import Actor, ActorTransducer, Emit, Send, Silent, parse_message, message_str
from .affine import LambdaTransducer, format_term, parse_term
from .bottomup import BottomUpAutomaton
from .hennie import Head, HennieMachine
from .lintypes import O, format_type, lolli_chain, parse_type
from .mtt import Call, MttSpec, Param
from .transforms import LookaroundMachine
from .trees import (
    IDENT_RE,
    STAY,
    UP,
    RankedAlphabet,
    Tree,
    TreeParseError,
)
from .util import TreetransError

NOTHERE_TOKEN = "_"


class FormatError(TreetransError):
    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


def _lines(text: str):
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def _parse_alphabet_inline(value: str, line: int) -> RankedAlphabet:
    symbols = []
    for part in value.split():
        if ":" not in part:
            raise FormatError(f"expected sym:rank, found {part!r}", line)
        name, rank = part.split(":", 1)
        try:
            symbols.append((name, int(rank)))
        except ValueError:
            raise FormatError(f"bad rank in {part!r}", line) from None
    return RankedAlphabet(tuple(symbols))


def _format_alphabet_inline(alph: RankedAlphabet) -> str:
    return " ".join(f"{n}:{r}" for n, r in alph.symbols)


# ---------------------------------------------------------------------------
# machine right-hand sides


def parse_rhs(text: str, line: int | None = None) -> Tree:
    """Term over the output alphabet whose leaves may be [q, m, d]."""
    pos = 0
    n = len(text)

    def skip():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def parse() -> Tree:
        nonlocal pos
        skip()
        if pos < n and text[pos] == "[":
            pos += 1
            q = ident()
            comma()
            m = ident()
            comma()
            skip()
            d_match = re.match(r"up|stay|\d+", text[pos:])
            if not d_match:
                raise FormatError(f"bad direction at column {pos}", line)
            d_raw = d_match.group(0)
            pos += len(d_raw)
            skip()
            if pos >= n or text[pos] != "]":
                raise FormatError(f"expected ']' at column {pos}", line)
            pos += 1
            d = UP if d_raw == "up" else STAY if d_raw == "stay" else int(d_raw)
            return Tree(Head(q, m, d))
        name = ident()
        skip()
        children = []
        if pos < n and text[pos] == "(":
            pos += 1
            children.append(parse())
            skip()
            while pos < n and text[pos] == ",":
                pos += 1
                children.append(parse())
                skip()
            if pos >= n or text[pos] != ")":
                raise FormatError(f"expected ')' at column {pos}", line)
            pos += 1
        return Tree(name, tuple(children))

    def ident() -> str:
        nonlocal pos
        skip()
        m = IDENT_RE.match(text, pos)
        if not m:
            raise FormatError(f"expected identifier at column {pos}", line)
        pos = m.end()
        return m.group(0)

    def comma():
        nonlocal pos
        skip()
        if pos >= n or text[pos] != ",":
            raise FormatError(f"expected ',' at column {pos}", line)
        pos += 1

    out = parse()
    skip()
    if pos != n:
        raise FormatError(f"trailing input at column {pos}", line)
    return out


def format_rhs(rhs: Tree) -> str:
    if isinstance(rhs.label, Head):
        h = rhs.label
        d = "up" if h.dir == UP else "stay" if h.dir == STAY else str(h.dir)
        return f"[{h.state},{h.mem},{d}]"
    if not rhs.children:
        return str(rhs.label)
    return f"{rhs.label}({','.join(format_rhs(c) for c in rhs.children)})"


# ---------------------------------------------------------------------------
# Hennie machines


def parse_machine(text: str):
    """A plain machine, or a lookaround machine when `lookaround:` appears."""
    headers: dict = {}
    rules: dict = {}
    la_states: tuple = ()
    la_delta: dict = {}
    la_rhs: dict = {}
    for no, line in _lines(text):
        if ":" in line and "->" not in line:
            key, value = line.split(":", 1)
            headers[key.strip()] = (value.strip(), no)
            continue
        if "->" not in line:
            raise FormatError(f"cannot parse {line!r}", no)
        left, right = line.split("->", 1)
        parts = [p.strip() for p in left.split(",")]
        if parts[0] == "la":
            if len(parts) == 4:
                parts = parts + [""]
            if len(parts) != 5:
                raise FormatError("lookaround rows are `la , sym , mem , state , kids -> value`", no)
            _, sym, mem, q, kids = parts
            key = ((sym, mem, q if q != NOTHERE_TOKEN else _nothere()), tuple(kids.split()))
            la_delta[key] = right.strip()
        elif parts[0] == "rhs":
            if len(parts) != 2:
                raise FormatError("lookaround results are `rhs , state -> RHS`", no)
            la_rhs[parts[1]] = parse_rhs(right.strip(), no)
        else:
            if len(parts) != 3:
                raise FormatError("rules are `state , sym , mem -> RHS`", no)
            rules[(parts[0], parts[1], parts[2])] = parse_rhs(right.strip(), no)

    def header(name, required=True, default=None):
        if name not in headers:
            if required:
                raise FormatError(f"missing header {name!r}")
            return default
        return headers[name][0]

    input_alph = _parse_alphabet_inline(*headers["input"]) if "input" in headers else None
    output_alph = _parse_alphabet_inline(*headers["output"]) if "output" in headers else None
    if input_alph is None or output_alph is None:
        raise FormatError("machine files need `input:` and `output:` alphabets")
    states = tuple(header("states").split())
    memory = tuple(header("memory").split())
    top = header("init")
    start = header("start")
    stays = header("stays", required=False, default="no") == "yes"

    if "lookaround" in headers:
        la_states = tuple(headers["lookaround"][0].split())
        delta = {}
        for ((sym, mem, q), kids), value in la_delta.items():
            delta[((sym, mem, q), kids)] = value
        auto = BottomUpAutomaton(la_states, delta)
        return LookaroundMachine(
            states=states,
            memory=memory,
            top=top,
            input_alphabet=input_alph,
            output_alphabet=output_alph,
            init_state=start,
            automaton=auto,
            rhs=la_rhs,
            allow_stay=stays,
        )
    m = HennieMachine(
        states=states,
        memory=memory,
        top=top,
        input_alphabet=input_alph,
        output_alphabet=output_alph,
        init_state=start,
        rules=rules,
        allow_stay=stays,
    )
    m.validate()
    return m


def _nothere():
    from .hennie import NOTHERE

    return NOTHERE


def format_machine(m: HennieMachine) -> str:
    """Serialize an explicit-table machine with identifier-named parts."""
    if not hasattr(m.rules, "items"):
        raise FormatError("cannot serialize a machine with a lazy rule table")
    out = [
        f"input: {_format_alphabet_inline(m.input_alphabet)}",
        f"output: {_format_alphabet_inline(m.output_alphabet)}",
        f"states: {' '.join(str(q) for q in m.states)}",
        f"memory: {' '.join(str(x) for x in m.memory)}",
        f"init: {m.top}",
        f"start: {m.init_state}",
    ]
    if m.allow_stay:
        out.append("stays: yes")
    for (q, sym, mem), rhs in m.rules.items():
        out.append(f"{q} , {sym} , {mem} -> {format_rhs(rhs)}")
    return "\n".join(out) + "\n"


def rename_machine(m: HennieMachine) -> HennieMachine:
    """Replace structured states/memory by generated identifiers (q0, m0, ...)."""
    if not hasattr(m.rules, "items"):
        raise FormatError("cannot rename a machine with a lazy rule table")
    qmap = {q: (q if isinstance(q, str) and IDENT_RE.fullmatch(q) else f"q{i}") for i, q in enumerate(m.states)}
    mmap = {x: (x if isinstance(x, str) and IDENT_RE.fullmatch(x) else f"m{i}") for i, x in enumerate(m.memory)}
    if len(set(qmap.values())) != len(qmap) or len(set(mmap.values())) != len(mmap):
        qmap = {q: f"q{i}" for i, q in enumerate(m.states)}
        mmap = {x: f"m{i}" for i, x in enumerate(m.memory)}

    def conv(rhs: Tree) -> Tree:
        if isinstance(rhs.label, Head):
            h = rhs.label
            return Tree(Head(qmap[h.state], mmap[h.mem], h.dir))
        return Tree(rhs.label, tuple(conv(c) for c in rhs.children))

    rules = {
        (qmap[q], sym, mmap[mem]): conv(rhs) for (q, sym, mem), rhs in m.rules.items()
    }
    return HennieMachine(
        states=tuple(qmap[q] for q in m.states),
        memory=tuple(mmap[x] for x in m.memory),
        top=mmap[m.top],
        input_alphabet=m.input_alphabet,
        output_alphabet=m.output_alphabet,
        init_state=qmap[m.init_state],
        rules=rules,
        allow_stay=m.allow_stay,
        initializer=m.initializer,
    )


# ---------------------------------------------------------------------------
# MTTs

_CALL_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\[x(\d+)\]")
_PARAM_RE = re.compile(r"y(\d+)$")
_STATE_DECL_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\[(\d+)\]$")


def parse_mtt(text: str) -> MttSpec:
    headers: dict = {}
    raw_rules = []
    for no, line in _lines(text):
        if ":" in line and "->" not in line:
            key, value = line.split(":", 1)
            headers[key.strip()] = (value.strip(), no)
            continue
        if "->" not in line:
            raise FormatError(f"cannot parse {line!r}", no)
        left, right = line.split("->", 1)
        parts = [p.strip() for p in left.split(",")]
        if len(parts) != 2:
            raise FormatError("rules are `state[rank] , sym -> RHS`", no)
        decl = _STATE_DECL_RE.fullmatch(parts[0])
        if not decl:
            raise FormatError(f"bad state declaration {parts[0]!r}", no)
        raw_rules.append((decl.group(1), int(decl.group(2)), parts[1], right.strip(), no))
    if "input" not in headers or "output" not in headers or "start" not in headers:
        raise FormatError("MTT files need `input:`, `output:` and `start:` headers")
    input_alph = _parse_alphabet_inline(*headers["input"])
    output_alph = _parse_alphabet_inline(*headers["output"])
    start = headers["start"][0]
    state_ranks: dict = {}
    for q, rank, _sym, _rhs, no in raw_rules:
        if state_ranks.setdefault(q, rank) != rank:
            raise FormatError(f"state {q!r} declared with two ranks", no)
    rules = {}
    for q, rank, sym, rhs, no in raw_rules:
        rules[(q, sym)] = _parse_mtt_rhs(rhs, no)
    spec = MttSpec(
        states=tuple(state_ranks.items()),
        init_state=start,
        input_alphabet=input_alph,
        output_alphabet=output_alph,
        rules=rules,
    )
    spec.validate()
    return spec


def _parse_mtt_rhs(text: str, line: int) -> Tree:
    pos = 0
    n = len(text)

    def skip():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def args():
        nonlocal pos
        skip()
        out = []
        if pos < n and text[pos] == "(":
            pos += 1
            out.append(parse())
            skip()
            while pos < n and text[pos] == ",":
                pos += 1
                out.append(parse())
                skip()
            if pos >= n or text[pos] != ")":
                raise FormatError(f"expected ')' at column {pos}", line)
            pos += 1
        return tuple(out)

    def parse() -> Tree:
        nonlocal pos
        skip()
        call = _CALL_RE.match(text, pos)
        if call:
            pos = call.end()
            return Tree(Call(call.group(1), int(call.group(2))), args())
        m = IDENT_RE.match(text, pos)
        if not m:
            raise FormatError(f"expected identifier at column {pos}", line)
        name = m.group(0)
        pos = m.end()
        param = _PARAM_RE.fullmatch(name)
        if param:
            return Tree(Param(int(param.group(1))))
        return Tree(name, args())

    out = parse()
    skip()
    if pos != n:
        raise FormatError(f"trailing input at column {pos}", line)
    return out


def format_mtt(m: MttSpec) -> str:
    out = [
        f"input: {_format_alphabet_inline(m.input_alphabet)}",
        f"output: {_format_alphabet_inline(m.output_alphabet)}",
        f"start: {m.init_state}",
    ]
    ranks = dict(m.states)
    for (q, sym), rhs in m.rules.items():
        out.append(f"{q}[{ranks[q]}] , {sym} -> {_format_mtt_rhs(rhs)}")
    return "\n".join(out) + "\n"


def _format_mtt_rhs(rhs: Tree) -> str:
    lbl = rhs.label
    inner = ",".join(_format_mtt_rhs(c) for c in rhs.children)
    wrap = f"({inner})" if rhs.children else ""
    if isinstance(lbl, Call):
        return f"{lbl.state}[x{lbl.child}]{wrap}"
    if isinstance(lbl, Param):
        return f"y{lbl.index}"
    return f"{lbl}{wrap}"


# ---------------------------------------------------------------------------
# actor transducers


def parse_actor_transducer(text: str) -> ActorTransducer:
    headers: dict = {}
    sections: dict = {}
    current = None
    for no, line in _lines(text):
        m = re.fullmatch(r"actor\s+(\S+)\s*:", line)
        if m:
            current = m.group(1)
            sections[current] = []
            continue
        if current is None:
            if ":" not in line:
                raise FormatError(f"cannot parse {line!r}", no)
            key, value = line.split(":", 1)
            headers[key.strip()] = (value.strip(), no)
        else:
            sections[current].append((no, line))
    for need in ("type", "input", "output"):
        if need not in headers:
            raise FormatError(f"actor files need `{need}:`")
    typ = parse_type(headers["type"][0])
    input_alph = _parse_alphabet_inline(*headers["input"])
    output_alph = _parse_alphabet_inline(*headers["output"])
    if "out" not in sections:
        raise FormatError("actor files need an `actor out:` section")
    transition = {}
    for sym, rank in input_alph.symbols:
        if sym not in sections:
            raise FormatError(f"missing `actor {sym}:` section")
        a_type = lolli_chain([typ] * rank, typ)
        transition[sym] = _parse_actor(sections[sym], a_type, output_alph)
    out_actor = _parse_actor(sections["out"], lolli_chain([typ], O), output_alph)
    at = ActorTransducer(
        type=typ,
        input_alphabet=input_alph,
        output_alphabet=output_alph,
        transition=transition,
        out=out_actor,
    )
    at.validate()
    return at


def _parse_actor(rows, typ, output_alph) -> Actor:
    headers: dict = {}
    d_minus: dict = {}
    d_plus: dict = {}
    for no, line in rows:
        if ":" in line and "->" not in line:
            key, value = line.split(":", 1)
            headers[key.strip()] = value.strip()
            continue
        if "->" not in line:
            raise FormatError(f"cannot parse {line!r}", no)
        left, right = line.split("->", 1)
        lparts = [p.strip() for p in left.split(",")]
        target = right.strip()
        if len(lparts) == 2:  # passive receive:  q , MSG -> q+
            d_minus[(lparts[0], parse_message(lparts[1]))] = target
            continue
        m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)\s*\(([^)]*)\)", target)
        if m:  # emission with children
            kids = tuple(x.strip() for x in m.group(2).split(",") if x.strip())
            d_plus[lparts[0]] = Emit(m.group(1), kids)
        elif "," in target:  # send:  q+ -> q- , MSG
            tgt, msg = (p.strip() for p in target.split(",", 1))
            d_plus[lparts[0]] = Send(tgt, parse_message(msg))
        elif target in output_alph.names() and output_alph.rank(target) == 0:
            d_plus[lparts[0]] = Emit(target, ())
        else:
            d_plus[lparts[0]] = Silent(target)
    for need in ("passive", "initial", "active"):
        if need not in headers:
            raise FormatError(f"actor sections need `{need}:`")
    return Actor(
        type=typ,
        passive=tuple(headers["passive"].split()),
        p_init=headers["initial"],
        active=tuple(headers["active"].split()),
        d_minus=d_minus,
        d_plus=d_plus,
        output_alphabet=output_alph,
    )


def format_actor_transducer(at: ActorTransducer) -> str:
    out = [
        f"type: {format_type(at.type)}",
        f"input: {_format_alphabet_inline(at.input_alphabet)}",
        f"output: {_format_alphabet_inline(at.output_alphabet)}",
    ]

    def emit(name: str, a: Actor):
        out.append(f"actor {name}:")
        out.append(f"  passive: {' '.join(map(str, a.passive))}")
        out.append(f"  initial: {a.p_init}")
        out.append(f"  active: {' '.join(map(str, a.active))}")
        for (q, msg), tgt in a.d_minus.items():
            out.append(f"  {q} , {message_str(msg)} -> {tgt}")
        for q, r in a.d_plus.items():
            if isinstance(r, Silent):
                out.append(f"  {q} -> {r.state}")
            elif isinstance(r, Emit):
                kids = f"({','.join(map(str, r.states))})" if r.states else ""
                out.append(f"  {q} -> {r.sym}{kids}")
            else:
                out.append(f"  {q} -> {r.state} , {message_str(r.msg)}")

    for sym, _ in at.input_alphabet.symbols:
        emit(sym, at.transition[sym])
    emit("out", at.out)
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# lambda transducers


def parse_lambda_transducer(text: str) -> LambdaTransducer:
    headers: dict = {}
    transitions: dict = {}
    output = None
    for no, line in _lines(text):
        m = re.fullmatch(r"T\s+([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)", line)
        if m:
            transitions[m.group(1)] = m.group(2)
            continue
        m = re.fullmatch(r"U\s*=\s*(.*)", line)
        if m:
            output = m.group(1)
            continue
        if ":" not in line:
            raise FormatError(f"cannot parse {line!r}", no)
        key, value = line.split(":", 1)
        headers[key.strip()] = (value.strip(), no)
    for need in ("mode", "memory", "input", "output"):
        if need not in headers:
            raise FormatError(f"lambda files need `{need}:`")
    if output is None:
        raise FormatError("lambda files need a `U = ...` line")
    input_alph = _parse_alphabet_inline(*headers["input"])
    output_alph = _parse_alphabet_inline(*headers["output"])
    consts = output_alph.names()
    lt = LambdaTransducer(
        memory_type=parse_type(headers["memory"][0]),
        mode=headers["mode"][0],
        input_alphabet=input_alph,
        output_alphabet=output_alph,
        transitions={sym: parse_term(body, consts) for sym, body in transitions.items()},
        output=parse_term(output, consts),
    )
    for sym, _ in input_alph.symbols:
        if sym not in lt.transitions:
            raise FormatError(f"missing transition term for {sym!r}")
    lt.validate_types()
    return lt


def format_lambda_transducer(lt: LambdaTransducer) -> str:
    if lt.defs.names():
        raise FormatError("cannot serialize a transducer with generated definitions")
    out = [
        f"mode: {lt.mode}",
        f"memory: {format_type(lt.memory_type)}",
        f"input: {_format_alphabet_inline(lt.input_alphabet)}",
        f"output: {_format_alphabet_inline(lt.output_alphabet)}",
    ]
    for sym, _ in lt.input_alphabet.symbols:
        out.append(f"T {sym} = {format_term(lt.transitions[sym])}")
    out.append(f"U = {format_term(lt.output)}")
    return "\n".join(out) + "\n"
