"""Actors: finite-state message-passing processes generating trees.

An actor alternates passive phases (awaiting one typed incoming message)
and active phases (silent steps, output-node emissions, or one outgoing
message).  Messages are L/R tag paths into the actor's type; application
synchronizes two actors, routing messages across the arrow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

from .generic import Completed, GenericMachine, MachineStuck, Proc, run_generic
from .hennie import BottomUpInit, Head, HennieMachine
from .bottomup import BottomUpAutomaton
from .trees import STAY, UP, RankedAlphabet, Tree
from .util import TreetransError


class ActorError(TreetransError):
    pass


# ---------------------------------------------------------------------------
# types and messages

from .lintypes import Base, Lolli, O, With, lolli_chain  # noqa: E402 (re-export)

Message = tuple  # path of "L"/"R" tags ending at a base-type occurrence


def enumerate_messages(a) -> tuple[frozenset, frozenset]:
    """(incoming, outgoing) message sets of a type, as L/R tag paths."""
    if isinstance(a, Base):
        return frozenset({()}), frozenset()
    if isinstance(a, Lolli):
        im_a, om_a = enumerate_messages(a.arg)
        im_b, om_b = enumerate_messages(a.res)
        inc = {("L",) + m for m in om_a} | {("R",) + m for m in im_b}
        out = {("L",) + m for m in im_a} | {("R",) + m for m in om_b}
        return frozenset(inc), frozenset(out)
    if isinstance(a, With):
        im_l, om_l = enumerate_messages(a.left)
        im_r, om_r = enumerate_messages(a.right)
        inc = {("L",) + m for m in im_l} | {("R",) + m for m in im_r}
        out = {("L",) + m for m in om_l} | {("R",) + m for m in om_r}
        return frozenset(inc), frozenset(out)
    raise ActorError(f"not a type: {a!r}")


def message_str(m: Message) -> str:
    return ".".join(list(m) + ["*"])


def parse_message(s: str) -> Message:
    parts = s.strip().split(".")
    if parts[-1] != "*":
        raise ActorError(f"message {s!r} must end in '*'")
    for p in parts[:-1]:
        if p not in ("L", "R"):
            raise ActorError(f"bad tag {p!r} in message {s!r}")
    return tuple(parts[:-1])


# ---------------------------------------------------------------------------
# actors


@dataclass(frozen=True)
class Silent:
    state: Any


@dataclass(frozen=True)
class Emit:
    sym: Any
    states: tuple


@dataclass(frozen=True)
class Send:
    state: Any  # passive successor
    msg: Message


@dataclass(frozen=True)
class Actor:
    type: Any
    passive: tuple
    p_init: Any
    active: tuple
    d_minus: Mapping  # (passive state, incoming message) -> active state
    d_plus: Mapping  # active state -> Silent | Emit | Send
    output_alphabet: RankedAlphabet
    parts: Optional[tuple] = field(default=None, compare=False, repr=False)

    def validate(self) -> None:
        inc, out = enumerate_messages(self.type)
        if not self.active:
            raise ActorError("active state set must be nonempty")
        if set(self.passive) & set(self.active):
            raise ActorError("passive and active states must be disjoint")
        for (q, m), target in self.d_minus.items():
            if m not in inc:
                raise ActorError(f"{message_str(m)} is not incoming at {self.type!r}")
            if q not in self.passive or target not in self.active:
                raise ActorError("d_minus must map passive states to active states")
        for q, r in self.d_plus.items():
            if q not in self.active:
                raise ActorError("d_plus keys must be active")
            if isinstance(r, Silent):
                if r.state not in self.active:
                    raise ActorError("silent step must target an active state")
            elif isinstance(r, Emit):
                if len(r.states) != self.output_alphabet.rank(r.sym):
                    raise ActorError(f"emission {r.sym!r} with wrong arity")
                if any(s not in self.active for s in r.states):
                    raise ActorError("emission children must be active states")
            elif isinstance(r, Send):
                if r.msg not in out:
                    raise ActorError(f"{message_str(r.msg)} is not outgoing at {self.type!r}")
                if r.state not in self.passive:
                    raise ActorError("send must leave a passive state")
            else:
                raise ActorError(f"bad active result {r!r}")


def apply_actor(beta: Actor, alpha: Actor) -> Actor:
    """The application beta(alpha); beta must have type alpha.type -o B."""
    if not isinstance(beta.type, Lolli) or beta.type.arg != alpha.type:
        raise ActorError(f"cannot apply {beta.type!r} to {alpha.type!r}")
    if beta.output_alphabet != alpha.output_alphabet:
        raise ActorError("actors must share the output alphabet")
    b = beta.type.res

    passive = tuple((qa, qb) for qa in alpha.passive for qb in beta.passive)
    active = tuple((qa, qb) for qa in alpha.active for qb in beta.passive) + tuple(
        (qa, qb) for qa in alpha.passive for qb in beta.active
    )
    d_minus = {}
    inc_b, _ = enumerate_messages(b)
    for (qa, qb) in passive:
        for m in inc_b:
            tgt = beta.d_minus.get((qb, ("R",) + m))
            if tgt is not None:
                d_minus[((qa, qb), m)] = (qa, tgt)

    d_plus = {}
    for st in active:
        qa, qb = st
        if qa in alpha.active:
            r = alpha.d_plus.get(qa)
            if r is None:
                continue
            if isinstance(r, Silent):
                d_plus[st] = Silent((r.state, qb))
            elif isinstance(r, Emit):
                d_plus[st] = Emit(r.sym, tuple((p, qb) for p in r.states))
            else:  # alpha sends m in OM(A); beta hears (L, m)
                tgt = beta.d_minus.get((qb, ("L",) + r.msg))
                if tgt is not None:
                    d_plus[st] = Silent((r.state, tgt))
        else:
            r = beta.d_plus.get(qb)
            if r is None:
                continue
            if isinstance(r, Silent):
                d_plus[st] = Silent((qa, r.state))
            elif isinstance(r, Emit):
                d_plus[st] = Emit(r.sym, tuple((qa, p) for p in r.states))
            elif r.msg[0] == "L":  # beta sends into alpha
                tgt = alpha.d_minus.get((qa, r.msg[1:]))
                if tgt is not None:
                    d_plus[st] = Silent((tgt, r.state))
            else:  # beta sends out of the composite
                d_plus[st] = Send((qa, r.state), r.msg[1:])

    return Actor(
        type=b,
        passive=passive,
        p_init=(alpha.p_init, beta.p_init),
        active=active,
        d_minus=d_minus,
        d_plus=d_plus,
        output_alphabet=beta.output_alphabet,
        parts=(alpha, beta),
    )


def count_active_factors(actor: Actor, state) -> int:
    """Leaf factors of a product state that are active (should be <= 1)."""
    if actor.parts is None:
        return 1 if state in actor.active else 0
    alpha, beta = actor.parts
    qa, qb = state
    return count_active_factors(alpha, qa) + count_active_factors(beta, qb)


def actor_generic(a: Actor, monitor=None) -> GenericMachine:
    """Tree-generating machine of an actor of type o."""
    if a.type != O:
        raise ActorError(f"can only run actors of base type, got {a.type!r}")
    init = a.d_minus.get((a.p_init, ()))

    def step(q):
        if q is None:
            raise MachineStuck(q, "initial incoming message undefined")
        if monitor is not None:
            monitor(q)
        r = a.d_plus.get(q)
        if r is None:
            raise MachineStuck(q, f"d_plus undefined at {q!r}")
        if isinstance(r, Silent):
            return Tree(Proc(r.state))
        if isinstance(r, Emit):
            return Tree(r.sym, tuple(Tree(Proc(p)) for p in r.states))
        raise MachineStuck(q, "outgoing message at base type")

    return GenericMachine(initial=init, step=step)


def run_actor(a: Actor, fuel: int = 10**6, monitor=None) -> Tree:
    result = run_generic(actor_generic(a, monitor), fuel)
    if isinstance(result, Completed):
        return result.tree
    raise ActorError(f"actor run did not complete: {type(result).__name__}")


# ---------------------------------------------------------------------------
# actor-based tree transducers


@dataclass(frozen=True)
class ActorTransducer:
    type: Any
    input_alphabet: RankedAlphabet
    output_alphabet: RankedAlphabet
    transition: Mapping  # input symbol -> Actor of A -o ... -o A
    out: Actor  # of type A -o o

    def validate(self) -> None:
        for sym, rank in self.input_alphabet.symbols:
            actor = self.transition[sym]
            want = lolli_chain([self.type] * rank, self.type)
            if actor.type != want:
                raise ActorError(f"transition actor for {sym!r} has type {actor.type!r}")
            actor.validate()
        if self.out.type != Lolli(self.type, O):
            raise ActorError("output actor must have type A -o o")
        self.out.validate()


def input_actor(at: ActorTransducer, t: Tree) -> Actor:
    actor = at.transition[t.label]
    for c in t.children:
        actor = apply_actor(actor, input_actor(at, c))
    return actor


def run_actor_transducer(
    at: ActorTransducer, t: Tree, fuel: int = 10**6, check_single_active: bool = False
) -> Tree:
    big = apply_actor(at.out, input_actor(at, t))
    monitor = None
    if check_single_active:
        def monitor(state):
            n = count_active_factors(big, state)
            if n != 1:
                raise ActorError(f"{n} active factors in {state!r}")
    return run_actor(big, fuel, monitor)


# ---------------------------------------------------------------------------
# direct flat-product interpreter (the k-ary application oracle)


def flat_generic(at: ActorTransducer, t: Tree) -> GenericMachine:
    """Interpreter over flat global states (node map + out actor), used as an
    independent oracle for the nested binary-application semantics."""
    addrs = tuple(t.addresses())
    labels = {u: t.node_at(u).label for u in addrs}
    ranks = {u: len(t.node_at(u).children) for u in addrs}
    init_passive = tuple((u, at.transition[labels[u]].p_init) for u in addrs)

    def result_port(u, m):
        return ("R",) * ranks[u] + m

    def arg_port(i, m):
        return ("R",) * (i - 1) + ("L",) + m

    # configurations: ("out", q_out_active, passive map) or (u, q_active, passive map, q_out)
    q0 = at.out.d_minus.get((at.out.p_init, ("R",)))

    def step(cfg):
        if cfg is None:
            raise MachineStuck(cfg, "output actor cannot start")
        if cfg[0] == "out":
            _, q_out, mem = cfg
            r = at.out.d_plus.get(q_out)
            if r is None:
                raise MachineStuck(cfg, "out actor stuck")
            if isinstance(r, Silent):
                return Tree(Proc(("out", r.state, mem)))
            if isinstance(r, Emit):
                return Tree(r.sym, tuple(Tree(Proc(("out", p, mem))) for p in r.states))
            if r.msg[0] != "L":
                raise MachineStuck(cfg, "out actor emitted at base type")
            root_actor = at.transition[labels[()]]
            tgt = root_actor.d_minus.get((dict(mem)[()], result_port((), r.msg[1:])))
            if tgt is None:
                raise MachineStuck(cfg, "root refuses message")
            return Tree(Proc(((), tgt, _set(mem, (), None), r.state)))
        u, q, mem, q_out = cfg
        actor = at.transition[labels[u]]
        r = actor.d_plus.get(q)
        if r is None:
            raise MachineStuck(cfg, f"node {u} stuck")
        if isinstance(r, Silent):
            return Tree(Proc((u, r.state, mem, q_out)))
        if isinstance(r, Emit):
            return Tree(r.sym, tuple(Tree(Proc((u, p, mem, q_out))) for p in r.states))
        msg = r.msg
        k = ranks[u]
        if msg[:k] == ("R",) * k:  # own result port: to parent or out
            inner = msg[k:]
            if u == ():
                tgt = at.out.d_minus.get((q_out, ("L",) + inner))
                if tgt is None:
                    raise MachineStuck(cfg, "out refuses result message")
                return Tree(Proc(("out", tgt, _set(mem, u, r.state))))
            parent, j = u[:-1], u[-1]
            pactor = at.transition[labels[parent]]
            tgt = pactor.d_minus.get((dict(mem)[parent], arg_port(j, inner)))
            if tgt is None:
                raise MachineStuck(cfg, "parent refuses message")
            return Tree(Proc((parent, tgt, _set(_set(mem, u, r.state), parent, None), q_out)))
        # argument port: message into child i
        prefix = 0
        while msg[prefix] == "R":
            prefix += 1
        i = prefix + 1
        inner = msg[prefix + 1:]
        child = u + (i,)
        cactor = at.transition[labels[child]]
        tgt = cactor.d_minus.get((dict(mem)[child], result_port(child, inner)))
        if tgt is None:
            raise MachineStuck(cfg, "child refuses message")
        return Tree(Proc((child, tgt, _set(_set(mem, u, r.state), child, None), q_out)))

    return GenericMachine(initial=("out", q0, init_passive), step=step)


def run_actor_transducer_flat(at: ActorTransducer, t: Tree, fuel: int = 10**6) -> Tree:
    result = run_generic(flat_generic(at, t), fuel)
    if isinstance(result, Completed):
        return result.tree
    raise ActorError(f"flat actor run did not complete: {type(result).__name__}")


def _set(mem: tuple, key, value) -> tuple:
    return tuple((k, value if k == key else v) for k, v in mem)


# ---------------------------------------------------------------------------
# weight-reducing actors


def _successor_states(r) -> tuple:
    if isinstance(r, Silent):
        return (r.state,)
    if isinstance(r, Emit):
        return tuple(r.states)
    return (r.state,)


def check_weight_reducing(a: Actor, weights: Mapping) -> bool:
    for (q, _m), tgt in a.d_minus.items():
        if weights[tgt] >= weights[q]:
            return False
    for q, r in a.d_plus.items():
        if any(weights[s] > weights[q] for s in _successor_states(r)):
            return False
    return True


def infer_weights(a: Actor) -> Optional[dict]:
    """Longest-path layering: strict d_minus edges, non-strict d_plus edges.

    None when some cycle goes through a strict edge (not layerable).
    """
    states = tuple(a.passive) + tuple(a.active)
    strict = {s: set() for s in states}
    loose = {s: set() for s in states}
    for (q, _m), tgt in a.d_minus.items():
        strict[q].add(tgt)
    for q, r in a.d_plus.items():
        loose[q].update(_successor_states(r))
    return _layer_by_scc(states, strict, loose)


def _layer_by_scc(states, strict, loose) -> Optional[dict]:
    index = {}
    low = {}
    on_stack = {}
    stack = []
    comp_of = {}
    counter = [0]
    comps = []

    def strong(v):
        work = [(v, iter(sorted(strict[v] | loose[v], key=repr)))]
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack[v] = True
        while work:
            node2, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(sorted(strict[w] | loose[w], key=repr))))
                    advanced = True
                    break
                elif on_stack.get(w):
                    low[node2] = min(low[node2], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[node2])
            if low[node2] == index[node2]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    comp_of[w] = len(comps)
                    if w == node2:
                        break
                comps.append(comp)

    for s in states:
        if s not in index:
            strong(s)

    for s in states:
        for t2 in strict[s]:
            if comp_of[s] == comp_of[t2]:
                return None  # strict edge inside a cycle

    memo: dict = {}

    def comp_weight(ci) -> int:
        if ci in memo:
            return memo[ci]
        best = 0
        for s in comps[ci]:
            for t2 in strict[s]:
                best = max(best, comp_weight(comp_of[t2]) + 1)
            for t2 in loose[s]:
                if comp_of[t2] != ci:
                    best = max(best, comp_weight(comp_of[t2]))
        memo[ci] = best
        return best

    return {s: comp_weight(comp_of[s]) for s in states}


def make_weight_reducing(a: Actor) -> Actor:
    """Counter augmentation: abort interactions exceeding |IM(type)| messages."""
    inc, _ = enumerate_messages(a.type)
    cap = len(inc)
    passive = tuple((q, c) for q in a.passive for c in range(cap + 1))
    active = tuple((q, c) for q in a.active for c in range(cap + 1))
    d_minus = {
        ((q, c), m): (tgt, c + 1)
        for (q, m), tgt in a.d_minus.items()
        for c in range(cap)
    }
    d_plus = {}
    for (q, c) in active:
        r = a.d_plus.get(q)
        if r is None:
            continue
        if isinstance(r, Silent):
            d_plus[(q, c)] = Silent((r.state, c))
        elif isinstance(r, Emit):
            d_plus[(q, c)] = Emit(r.sym, tuple((s, c) for s in r.states))
        else:
            d_plus[(q, c)] = Send((r.state, c), r.msg)
    return Actor(
        type=a.type,
        passive=passive,
        p_init=(a.p_init, 0),
        active=active,
        d_minus=d_minus,
        d_plus=d_plus,
        output_alphabet=a.output_alphabet,
    )


def transducer_weights(at: ActorTransducer) -> Optional[int]:
    """Max inferred weight over all component actors; None if any fails."""
    best = 0
    for sym, _ in at.input_alphabet.symbols:
        w = infer_weights(at.transition[sym])
        if w is None:
            return None
        best = max(best, max(w.values(), default=0))
    w = infer_weights(at.out)
    if w is None:
        return None
    return max(best, max(w.values(), default=0))


# ---------------------------------------------------------------------------
# compilation to a Hennie machine


@dataclass(frozen=True)
class OutA:
    """Output actor is active (head parked at the root)."""

    state: Any


@dataclass(frozen=True)
class NodeA:
    """The current node's process is active."""

    sym: Any
    state: Any
    out: Any


@dataclass(frozen=True)
class CarryDown:
    """Incoming message for the result port of the node being entered."""

    msg: Message
    out: Any


@dataclass(frozen=True)
class CarryUp:
    """Outgoing result message from the child we just left."""

    msg: Message
    out: Any


@dataclass(frozen=True)
class NodeMem:
    sym: Any
    state: Any  # passive state of this node's process
    awaiting: Optional[int]  # child index the process last sent into
    at_root: bool


def compile_actor_to_hennie(at: ActorTransducer) -> HennieMachine:
    """Step-by-step simulation of out(alpha_t) by a machine with stays and a
    bottom-up initializer.

    The head parks at the active subprocess; memory stores passive states.
    Message deliveries ride carrier states across one edge, the receiving
    node's memory remembering which child it awaits, and the root's memory
    is flagged on the output actor's first delivery so result messages at
    the root go to the output actor instead of upward.
    """
    at.validate()
    sigma = at.input_alphabet
    inc, _out_msgs = enumerate_messages(at.type)
    _im2, om = enumerate_messages(at.type)

    def result_port(sym, m):
        return ("R",) * sigma.rank(sym) + m

    def arg_port(i, m):
        return ("R",) * (i - 1) + ("L",) + m

    states: list = [OutA(q) for q in at.out.active]
    for sym, _ in sigma.symbols:
        states += [
            NodeA(sym, q, qo) for q in at.transition[sym].active for qo in at.out.passive
        ]
    states += [CarryDown(m, qo) for m in inc for qo in at.out.passive]
    states += [CarryUp(m, qo) for m in om for qo in at.out.passive]

    memory: list = []
    for sym, rank in sigma.symbols:
        for q in at.transition[sym].passive:
            for aw in (None,) + tuple(range(1, sigma.max_rank + 1)):
                for rt in (False, True):
                    memory.append(NodeMem(sym, q, aw, rt))

    rules: dict = {}

    def node_active_rhs(sym, mem: NodeMem, q_active, q_out):
        """Chase the node process's activity from state q_active at sym."""
        actor = at.transition[sym]
        r = actor.d_plus.get(q_active)
        if r is None:
            return None
        if isinstance(r, Silent):
            return Tree(Head(NodeA(sym, r.state, q_out), mem, STAY))
        if isinstance(r, Emit):
            kids = tuple(
                Tree(Head(NodeA(sym, p, q_out), mem, STAY)) for p in r.states
            )
            return Tree(r.sym, kids)
        msg = r.msg
        k = sigma.rank(sym)
        if msg[:k] == ("R",) * k:  # own result port
            inner = msg[k:]
            if mem.at_root:
                tgt = at.out.d_minus.get((q_out, ("L",) + inner))
                if tgt is None:
                    return None
                new_mem = NodeMem(sym, r.state, mem.awaiting, True)
                return Tree(Head(OutA(tgt), new_mem, STAY))
            new_mem = NodeMem(sym, r.state, mem.awaiting, False)
            return Tree(Head(CarryUp(inner, q_out), new_mem, UP))
        i = 0
        while msg[i] == "R":
            i += 1
        child = i + 1
        inner = msg[i + 1:]
        new_mem = NodeMem(sym, r.state, child, mem.at_root)
        return Tree(Head(CarryDown(inner, q_out), new_mem, child))

    for sym, rank in sigma.symbols:
        actor = at.transition[sym]
        for mem in memory:
            if mem.sym != sym:
                continue
            # output actor active: only meaningful at the root
            for qo_a in at.out.active:
                r = at.out.d_plus.get(qo_a)
                if r is None:
                    continue
                if isinstance(r, Silent):
                    rules[(OutA(qo_a), sym, mem)] = Tree(Head(OutA(r.state), mem, STAY))
                elif isinstance(r, Emit):
                    rules[(OutA(qo_a), sym, mem)] = Tree(
                        r.sym, tuple(Tree(Head(OutA(p), mem, STAY)) for p in r.states)
                    )
                else:  # deliver into the root process, flagging the root
                    tgt = actor.d_minus.get((mem.state, result_port(sym, r.msg[1:])))
                    if tgt is not None:
                        flagged = NodeMem(sym, mem.state, mem.awaiting, True)
                        rules[(OutA(qo_a), sym, mem)] = Tree(
                            Head(NodeA(sym, tgt, r.state), flagged, STAY)
                        )
            # node process active
            for q in actor.active:
                for qo in at.out.passive:
                    rhs = node_active_rhs(sym, mem, q, qo)
                    if rhs is not None:
                        rules[(NodeA(sym, q, qo), sym, mem)] = rhs
            # carrier arrivals
            for m in inc:
                for qo in at.out.passive:
                    tgt = actor.d_minus.get((mem.state, result_port(sym, m)))
                    if tgt is not None:
                        rules[(CarryDown(m, qo), sym, mem)] = Tree(
                            Head(NodeA(sym, tgt, qo), mem, STAY)
                        )
            for m in om:
                if mem.awaiting is None:
                    continue
                for qo in at.out.passive:
                    tgt = actor.d_minus.get((mem.state, arg_port(mem.awaiting, m)))
                    if tgt is not None:
                        rules[(CarryUp(m, qo), sym, mem)] = Tree(
                            Head(NodeA(sym, tgt, qo), mem, STAY)
                        )

    init_auto = BottomUpAutomaton(
        states=tuple(s for s, _ in sigma.symbols),
        delta={
            (sym, tuple(combo)): sym
            for sym, rank in sigma.symbols
            for combo in _combos(tuple(s for s, _ in sigma.symbols), rank)
        },
    )
    init_map = {
        sym: NodeMem(sym, at.transition[sym].p_init, None, False)
        for sym, _ in sigma.symbols
    }
    q0 = at.out.d_minus.get((at.out.p_init, ("R",)))
    if q0 is None:
        raise ActorError("output actor has no initial transition")
    return HennieMachine(
        states=tuple(states),
        memory=tuple(memory),
        top=memory[0],
        input_alphabet=sigma,
        output_alphabet=at.output_alphabet,
        init_state=OutA(q0),
        rules=rules,
        allow_stay=True,
        initializer=BottomUpInit(init_auto, init_map),
    )


def _combos(items, k):
    from itertools import product

    return product(items, repeat=k)
