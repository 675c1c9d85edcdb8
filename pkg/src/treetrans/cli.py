"""Command-line frontend: run models, compile between them, check properties.

Exit codes: 0 on success, 1 on semantic failures (undefined runs, failed
checks), 2 on usage errors (bad arguments, unparsable files).
"""

from __future__ import annotations

import argparse
import sys

from .actors import compile_actor_to_hennie, run_actor_transducer, transducer_weights
from .affine import (
    HennieToLambda,
    Signature,
    format_term,
    normalize,
    parse_term,
    run_lambda_transducer,
    typecheck,
    inverse_regular,
)
from .bottomup import Recognizer, total_automaton
from .compose import compose_hennie, composed_generic, max_forest_length, run_composed
from .corpus import all_trees, random_corpus
from .formats import (
    format_machine,
    parse_actor_transducer,
    parse_lambda_transducer,
    parse_machine,
    parse_mtt,
    rename_machine,
)
from .generic import Completed, MachineStuck, OutOfFuel, Proc, Stuck, run_generic
from .hennie import (
    HennieMachine,
    cap_weight_reducing,
    check_visit_bound,
    hennie_generic,
    is_weight_reducing,
    max_antichain_visits,
    run_hennie,
)
from .lintypes import format_type, parse_type
from .mtt import compile_mtt_to_hennie, mtt_generic, run_mtt
from .profiles import ExecutionOrder, coherent_global_profiles, decode_profile, profile_of_output_node
from .transforms import LookaroundMachine, eliminate_lookaround, eliminate_stays, inline_bottom_up_init, run_lookaround
from .trees import (
    STAY,
    UP,
    Tree,
    format_tree,
    parse_alphabet,
    parse_tree,
)
from .util import TreetransError


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from None


def _addr(u: tuple) -> str:
    return ".".join(map(str, u)) if u else "e"


def _dir(d) -> str:
    return {UP: "up", STAY: "stay"}.get(d, str(d))


def _emit_skeleton(ctx: Tree) -> str:
    if isinstance(ctx.label, Proc):
        return "_"
    if not ctx.children:
        return str(ctx.label)
    return f"{ctx.label}({','.join(_emit_skeleton(c) for c in ctx.children)})"


def _trace_run(gm, fuel: int, out) -> object:
    """run_generic with one trace line per rewrite, leftmost order."""
    step_fn = gm.step
    counter = [0]

    def traced(cfg):
        ctx = step_fn(cfg)
        counter[0] += 1
        has_pos = hasattr(cfg, "pos") and hasattr(cfg, "state")
        where = f"({_addr(cfg.pos)}, {cfg.state})" if has_pos else repr(cfg)
        moves = []

        def heads(nd):
            if isinstance(nd.label, Proc):
                c = nd.label.config
                if has_pos and hasattr(c, "pos"):
                    if c.pos == cfg.pos:
                        moves.append("stay")
                    elif len(c.pos) < len(cfg.pos):
                        moves.append("up")
                    else:
                        moves.append(str(c.pos[-1]))
                else:
                    moves.append("?")
            for ch in nd.children:
                heads(ch)

        heads(ctx)
        print(
            f"step {counter[0]} : {where} -> emits {_emit_skeleton(ctx)} / moves [{', '.join(moves)}]",
            file=out,
        )
        return ctx

    from .generic import GenericMachine

    return run_generic(GenericMachine(gm.initial, traced), fuel)


def _finish_run(result, out) -> int:
    if isinstance(result, Completed):
        print(format_tree(result.tree), file=out)
        return 0
    if isinstance(result, OutOfFuel):
        print("out of fuel; partial output:", format_tree(result.partial), file=sys.stderr)
        return 1
    print(f"stuck: {result.reason}", file=sys.stderr)
    return 1


def _load_machine(path: str):
    m = parse_machine(_read(path))
    return m


def _plain_machine(path: str) -> HennieMachine:
    m = _load_machine(path)
    if isinstance(m, LookaroundMachine):
        raise UsageError(f"{path} declares a lookaround machine; eliminate it first")
    return m


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args, out) -> int:
    fuel = args.fuel
    if args.model == "hennie":
        m = _load_machine(args.machine)
        t = parse_tree(args.input, m.input_alphabet)
        if isinstance(m, LookaroundMachine):
            from .transforms import lookaround_generic

            gm = lookaround_generic(m, t)
        else:
            gm = hennie_generic(m, t)
        result = _trace_run(gm, fuel, out) if args.trace else run_generic(gm, fuel)
        return _finish_run(result, out)
    if args.model == "mtt":
        m = parse_mtt(_read(args.machine))
        t = parse_tree(args.input, m.input_alphabet)
        gm = mtt_generic(m, t)
        result = _trace_run(gm, fuel, out) if args.trace else run_generic(gm, fuel)
        return _finish_run(result, out)
    if args.model == "actor":
        at = parse_actor_transducer(_read(args.machine))
        t = parse_tree(args.input, at.input_alphabet)
        try:
            print(format_tree(run_actor_transducer(at, t, fuel)), file=out)
            return 0
        except TreetransError as e:
            print(f"actor run failed: {e}", file=sys.stderr)
            return 1
    if args.model == "lambda":
        lt = parse_lambda_transducer(_read(args.machine))
        t = parse_tree(args.input, lt.input_alphabet)
        try:
            print(format_tree(run_lambda_transducer(lt, t, fuel)), file=out)
            return 0
        except TreetransError as e:
            print(f"lambda run failed: {e}", file=sys.stderr)
            return 1
    raise UsageError(f"unknown model {args.model!r}")


def cmd_oracle(args, out) -> int:
    from .trees import EXA_ALPHABET, exa_oracle

    if args.which != "exa":
        raise UsageError("the only bundled oracle is `exa`")
    t = parse_tree(args.input, EXA_ALPHABET)
    print(format_tree(exa_oracle(t)), file=out)
    return 0


def cmd_compile(args, out) -> int:
    fuel = args.fuel
    if args.what == "mtt-to-thm":
        m = compile_mtt_to_hennie(parse_mtt(_read(args.machine)))
        compiled = rename_machine(m)
        runnable = m
    elif args.what == "actor-to-thm":
        at = parse_actor_transducer(_read(args.machine))
        runnable = compile_actor_to_hennie(at)
        compiled = None
        if args.out:
            compiled = rename_machine(eliminate_stays(inline_bottom_up_init(runnable)))
    elif args.what == "eliminate-stays":
        runnable = compiled = eliminate_stays(_plain_machine(args.machine))
    elif args.what == "eliminate-lookaround":
        lm = _load_machine(args.machine)
        if not isinstance(lm, LookaroundMachine):
            raise UsageError("eliminate-lookaround expects a lookaround machine file")
        runnable = eliminate_lookaround(lm)
        compiled = None
    elif args.what == "cap":
        if args.bound is None or args.default_leaf is None:
            raise UsageError("cap needs --bound and --default-leaf")
        m = cap_weight_reducing(_plain_machine(args.machine), args.bound, args.default_leaf)
        compiled = rename_machine(m)
        runnable = m
    elif args.what == "thm-to-lambda":
        m = _plain_machine(args.machine)
        comp = HennieToLambda(m, args.default_leaf)
        lt = comp.transducer()
        print(f"memory type: {format_type(lt.memory_type)}", file=out)
        if args.run_input:
            t = parse_tree(args.run_input, m.input_alphabet)
            print(format_tree(run_lambda_transducer(lt, t, fuel)), file=out)
        return 0
    else:
        raise UsageError(f"unknown compilation {args.what!r}")

    if args.out:
        if compiled is None:
            raise UsageError(f"{args.what} output cannot be serialized")
        with open(args.out, "w") as fh:
            fh.write(format_machine(compiled))
        print(f"wrote {args.out}", file=out)
    if args.run_input:
        t = parse_tree(args.run_input, runnable.input_alphabet)
        result = run_generic(hennie_generic(runnable, t), fuel)
        return _finish_run(result, out)
    return 0


def cmd_compose(args, out) -> int:
    outer = _plain_machine(args.outer)
    inner = _plain_machine(args.inner)
    cm = compose_hennie(outer, inner, args.cfv, args.cfnv)
    t = parse_tree(args.input, inner.input_alphabet)
    gm = composed_generic(cm, t)
    result = _trace_run(gm, args.fuel, out) if args.trace else run_generic(gm, args.fuel)
    return _finish_run(result, out)


def cmd_check(args, out) -> int:
    m = _plain_machine(args.machine)
    if args.what == "visits":
        t = parse_tree(args.input, m.input_alphabet)
        cx = check_visit_bound(m, t, args.bound, args.fuel)
        if cx is None:
            print("pass", file=out)
            return 0
        print(f"counterexample: node {_addr(cx.node)} visited {cx.count} times", file=out)
        return 1
    if args.what == "antichain":
        t = parse_tree(args.input, m.input_alphabet)
        _result, stats = run_hennie(m, t, args.fuel)
        worst = max((max_antichain_visits(p, t) for p in stats.paths), default=0)
        print(f"max antichain visits over runs: {worst}", file=out)
        return 0
    if args.what == "weight-order":
        order = None
        if args.order:
            order = [tuple(p.split(">")) for p in args.order.split()]
        ok = is_weight_reducing(m, order)
        print("weight-reducing" if ok else "not weight-reducing", file=out)
        return 0 if ok else 1
    raise UsageError(f"unknown check {args.what!r}")


def cmd_profiles(args, out) -> int:
    if args.what != "verify":
        raise UsageError("the profiles subcommand is `profiles verify`")
    m = _plain_machine(args.machine)
    t = parse_tree(args.input, m.input_alphabet)
    result = run_generic(hennie_generic(m, t), args.fuel)
    if not isinstance(result, Completed):
        print("machine run did not complete", file=sys.stderr)
        return 1
    outtree = result.tree
    count = sum(1 for _ in coherent_global_profiles(m, t, args.bound))
    ok = count == outtree.size
    print(f"coherent global profiles: {count}", file=out)
    print(f"output nodes: {outtree.size}", file=out)
    roundtrip = True
    for u in outtree.addresses():
        g = profile_of_output_node(m, t, u)
        lbl, word = decode_profile(m, t, g)
        if lbl != outtree.node_at(u).label or tuple(i for _, i in word) != u:
            roundtrip = False
    print(f"bijection count: {'pass' if ok else 'fail'}", file=out)
    print(f"round trips: {'pass' if roundtrip else 'fail'}", file=out)
    return 0 if ok and roundtrip else 1


def cmd_normalize(args, out) -> int:
    sig = Signature(parse_alphabet_inline(args.sig), args.mode)
    term = parse_term(args.term, sig.alphabet.names())
    if args.type:
        typecheck(sig, term, parse_type(args.type))
    print(format_term(normalize(term, fuel=args.fuel)), file=out)
    return 0


def parse_alphabet_inline(text: str):
    from .formats import _parse_alphabet_inline

    return _parse_alphabet_inline(text, 0)


def cmd_invreg(args, out) -> int:
    lt = parse_lambda_transducer(_read(args.transducer))
    gamma = lt.output_alphabet
    if args.root_label:
        auto = total_automaton(gamma, gamma.names(), lambda s, k: s)
        rec = Recognizer(auto, {s: s for s in gamma.names()})
        accepting = {args.root_label}
    elif args.contains:
        sym = args.contains
        auto = total_automaton(
            gamma, ("no", "yes"), lambda s, k: "yes" if s == sym or "yes" in k else "no"
        )
        rec = Recognizer(auto, {"no": False, "yes": True})
        accepting = {True}
    else:
        auto = total_automaton(
            gamma,
            (0, 1),
            lambda s, k: (1 if gamma.rank(s) == 0 else sum(k)) % 2,
        )
        rec = Recognizer(auto, {0: 0, 1: 1})
        accepting = {args.leaf_parity}
    inv = inverse_regular(lt, rec, accepting)
    print(f"automaton states: {len(inv.automaton.states)}", file=out)
    bad = 0
    for t in all_trees(lt.input_alphabet, args.max_nodes):
        want = rec.phi[rec.automaton.value(run_lambda_transducer(lt, t, args.fuel))] in accepting
        got = inv.classify(t)
        if got != want:
            bad += 1
    print(f"agreement on inputs up to {args.max_nodes} nodes: {'pass' if bad == 0 else f'{bad} mismatches'}", file=out)
    return 0 if bad == 0 else 1


def cmd_corpus(args, out) -> int:
    alph = parse_alphabet_inline(args.alphabet)
    if args.count:
        for t in random_corpus(alph, args.max_nodes, args.count, args.seed):
            print(format_tree(t), file=out)
    else:
        for t in all_trees(alph, args.max_nodes):
            print(format_tree(t), file=out)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="treetrans", description=__doc__)
    p.add_argument("--fuel", type=int, default=10**6, help="step budget (default 10^6)")
    sub = p.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run a transducer on an input tree")
    run.add_argument("--model", required=True, choices=["hennie", "mtt", "actor", "lambda"])
    run.add_argument("--machine", required=True)
    run.add_argument("--input", required=True)
    run.add_argument("--trace", action="store_true")

    oracle = sub.add_parser("oracle", help="run a bundled oracle")
    oracle.add_argument("which", choices=["exa"])
    oracle.add_argument("--input", required=True)

    comp = sub.add_parser("compile", help="translate between models")
    comp.add_argument(
        "what",
        choices=[
            "mtt-to-thm",
            "actor-to-thm",
            "thm-to-lambda",
            "eliminate-stays",
            "eliminate-lookaround",
            "cap",
        ],
    )
    comp.add_argument("--machine", required=True)
    comp.add_argument("--out")
    comp.add_argument("--run-input")
    comp.add_argument("--bound", type=int)
    comp.add_argument("--default-leaf")

    cps = sub.add_parser("compose", help="compose two Hennie machines")
    cps.add_argument("--outer", required=True)
    cps.add_argument("--inner", required=True)
    cps.add_argument("--cfv", type=int, required=True)
    cps.add_argument("--cfnv", type=int, required=True)
    cps.add_argument("--input", required=True)
    cps.add_argument("--trace", action="store_true")

    chk = sub.add_parser("check", help="check machine properties")
    chk.add_argument("what", choices=["visits", "antichain", "weight-order"])
    chk.add_argument("--machine", required=True)
    chk.add_argument("--input")
    chk.add_argument("--bound", type=int)
    chk.add_argument("--order", help="strict pairs like 'top>L top>R L>X'")

    prof = sub.add_parser("profiles", help="profile bijection checks")
    prof.add_argument("what", choices=["verify"])
    prof.add_argument("--machine", required=True)
    prof.add_argument("--input", required=True)
    prof.add_argument("--bound", type=int, required=True)

    norm = sub.add_parser("normalize", help="beta-normalize a term")
    norm.add_argument("--term", required=True)
    norm.add_argument("--sig", required=True, help="constants as 'a:2 b:0'")
    norm.add_argument("--mode", default="additive", choices=["additive", "multiplicative"])
    norm.add_argument("--type")

    inv = sub.add_parser("invreg", help="inverse image of a regular language")
    inv.add_argument("--transducer", required=True)
    which = inv.add_mutually_exclusive_group(required=True)
    which.add_argument("--root-label")
    which.add_argument("--contains")
    which.add_argument("--leaf-parity", type=int, choices=[0, 1])
    inv.add_argument("--max-nodes", type=int, default=6)

    cor = sub.add_parser("corpus", help="emit input trees")
    cor.add_argument("--alphabet", required=True)
    cor.add_argument("--max-nodes", type=int, required=True)
    cor.add_argument("--count", type=int)
    cor.add_argument("--seed", type=int, default=0)

    return p


COMMANDS = {
    "run": cmd_run,
    "oracle": cmd_oracle,
    "compile": cmd_compile,
    "compose": cmd_compose,
    "check": cmd_check,
    "profiles": cmd_profiles,
    "normalize": cmd_normalize,
    "invreg": cmd_invreg,
    "corpus": cmd_corpus,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.cmd](args, out)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except TreetransError as e:
        print(f"error: {e}", file=sys.stderr)
        if _is_input_shaped(e):
            return 2
        return 1


def _is_input_shaped(e: Exception) -> bool:
    from .formats import FormatError
    from .trees import AlphabetError, TreeParseError
    from .lintypes import TypeParseError

    return isinstance(e, (FormatError, TreeParseError, AlphabetError, TypeParseError))


if __name__ == "__main__":
    sys.exit(main())
