"""The cgv command-line tool.

Subcommands: check, run, translate, certify, correspond, fmt. Results go
to stdout, diagnostics to stderr. Exit codes: 0 success, 1 usage or
internal error, 2 negative verdict (type error, not certified, stuck
correspondence search).
"""

from __future__ import annotations

import argparse
import json
import sys

from .names import fresh, reset_supply
from . import syntax as S
from . import surface
from . import typecheck as TC
from . import reduce as RD
from . import apcp as A
from . import translate as TR
from . import deadlock as DL
from . import correspond as CO
from .pretty import print_config, print_term, print_funtype

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NEGATIVE = 2


def _load(path: str, runtime: bool):
    sf = surface.load_file(path, runtime=runtime)
    if not sf.ok:
        for d in sf.diagnostics:
            print(d.render(sf.path), file=sys.stderr)
        return None
    return sf.parsed


def _is_runtime_file(path: str) -> bool:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    return first.startswith("--") and "runtime" in first


def _expected_type(args) -> S.FunType:
    if args.type is None:
        return S.UNIT
    toks = surface.lex(args.type)
    ty = surface.Parser(toks).funtype()
    return ty


def cmd_check(args) -> int:
    subject = _load(args.file, args.runtime or _is_runtime_file(args.file))
    if subject is None:
        return EXIT_NEGATIVE
    try:
        if isinstance(subject, S.Configuration):
            marker = TC.check_config({}, subject, _expected_type(args))
            out = {"kind": "configuration", "marker": marker,
                   "type": print_funtype(_expected_type(args))}
        else:
            ty, leftover = TC.synth_term({}, subject)
            out = {"kind": "term", "type": print_funtype(ty)}
    except TC.TypeCheckError as e:
        print(e.structured(), file=sys.stderr)
        return EXIT_NEGATIVE
    if args.json:
        print(json.dumps(out))
    else:
        print(" ".join(f"{k}={v}" for k, v in out.items()))
    return EXIT_OK


def cmd_run(args) -> int:
    subject = _load(args.file, args.runtime or _is_runtime_file(args.file))
    if subject is None:
        return EXIT_NEGATIVE
    if isinstance(subject, S.Configuration) and not args.unchecked:
        try:
            TC.check_config({}, subject, _expected_type(args))
        except TC.TypeCheckError as e:
            print(e.structured(), file=sys.stderr)
            return EXIT_NEGATIVE
    if args.scheduler == "exhaustive":
        if isinstance(subject, S.Term):
            print("error | usage | - | exhaustive exploration needs a configuration",
                  file=sys.stderr)
            return EXIT_ERROR
        ex = RD.explore(subject, bound=args.bound,
                        both_orders=args.both_orders,
                        loose_contexts=args.loose_contexts)
        if args.json:
            print(json.dumps({
                "states": ex.state_count, "edges": ex.edges,
                "truncated": ex.truncated,
                "terminals": [print_config(t) for t in ex.terminals]}))
        else:
            print(f"states: {ex.state_count}  edges: {ex.edges}"
                  + ("  (truncated)" if ex.truncated else ""))
            for t in ex.terminals:
                print("terminal:", print_config(t))
        return EXIT_OK
    if isinstance(subject, S.Term):
        trace = RD.run_term(subject, args.scheduler, fuel=args.fuel,
                            seed=args.seed, both_orders=args.both_orders)
        final = print_term(trace.final)
    else:
        trace = RD.run(subject, args.scheduler, fuel=args.fuel, seed=args.seed,
                       both_orders=args.both_orders,
                       loose_contexts=args.loose_contexts)
        final = print_config(trace.final)
    if args.json:
        print(json.dumps({
            "events": [e.to_json(i) for i, e in enumerate(trace.events, 1)],
            "final": final, "fuel_exhausted": trace.fuel_exhausted}))
    else:
        rendered = trace.render()
        if rendered:
            print(rendered)
        print("final:", final)
    if trace.fuel_exhausted:
        print("warning | fuel | - | fuel exhausted", file=sys.stderr)
    return EXIT_OK


def _derive(subject, args):
    expected = _expected_type(args)
    marker, deriv = TC.check_config_derivation({}, subject, expected)
    return deriv


def cmd_translate(args) -> int:
    subject = _load(args.file, args.runtime or _is_runtime_file(args.file))
    if subject is None:
        return EXIT_NEGATIVE
    if isinstance(subject, S.Term):
        print("error | usage | - | translation needs a configuration",
              file=sys.stderr)
        return EXIT_ERROR
    try:
        deriv = _derive(subject, args)
    except TC.TypeCheckError as e:
        print(e.structured(), file=sys.stderr)
        return EXIT_NEGATIVE
    z = fresh("z")
    process = TR.trans_config(deriv, z)
    solution = None
    if args.annotate_priorities:
        try:
            cs = A.check_process(process, {z: A.BULLET}, "strict")
            solution = A.solve_priorities(cs)
        except (A.ProcessTypeError, A.Unsatisfiable) as e:
            print(f"warning | priorities | - | {e}", file=sys.stderr)
    text = A.print_process(process)
    if args.json:
        out = {"result_endpoint": z.text, "process": text}
        if solution is not None:
            out["priorities"] = {f"p{k}": v for k, v in sorted(solution.items())}
        print(json.dumps(out))
    else:
        print(text)
        if solution is not None:
            assigned = ", ".join(f"p{k}={v}" for k, v in sorted(solution.items()))
            print(f"-- priorities: {assigned}")
    return EXIT_OK


def cmd_certify(args) -> int:
    subject = _load(args.file, args.runtime or _is_runtime_file(args.file))
    if subject is None:
        return EXIT_NEGATIVE
    if isinstance(subject, S.Term):
        print("error | usage | - | certification needs a configuration",
              file=sys.stderr)
        return EXIT_ERROR
    verdict = DL.certify(subject, loose_contexts=args.loose_contexts)
    if args.json:
        out = {"certified": verdict.certified, "reason": verdict.reason}
        if verdict.witness:
            out["witness"] = [str(p) for p in verdict.witness]
        if verdict.assignment is not None:
            out["priorities"] = {f"p{k}": v
                                 for k, v in sorted(verdict.assignment.items())}
        print(json.dumps(out))
    else:
        print(verdict.render())
    if verdict.certified and args.audit:
        report = DL.progress_audit(subject, bound=args.bound,
                                   loose_contexts=args.loose_contexts)
        print(report.render())
        if not report.ok:
            return EXIT_ERROR
    return EXIT_OK if verdict.certified else EXIT_NEGATIVE


def cmd_correspond(args) -> int:
    subject = _load(args.file, args.runtime or _is_runtime_file(args.file))
    if subject is None:
        return EXIT_NEGATIVE
    if isinstance(subject, S.Term):
        print("error | usage | - | correspondence needs a configuration",
              file=sys.stderr)
        return EXIT_ERROR
    try:
        reports = CO.trace_completeness(subject, _expected_type(args),
                                        bound=args.bound,
                                        loose_contexts=args.loose_contexts)
    except TC.TypeCheckError as e:
        print(e.structured(), file=sys.stderr)
        return EXIT_NEGATIVE
    sound = None
    if args.sound_probe:
        sound = CO.soundness_probe(subject, _expected_type(args),
                                   loose_contexts=args.loose_contexts)
    if args.json:
        out = {"steps": [{"rule": r.rule, "path": r.path, "matched": r.matched,
                          "target_steps": r.target_steps} for r in reports]}
        if sound is not None:
            out["soundness"] = {"explored": sound.explored,
                                "resolved": sound.resolved,
                                "corollary_ok": sound.corollary_ok,
                                "note": sound.note}
        print(json.dumps(out))
    else:
        for r in reports:
            print(r.render())
        if sound is not None:
            print(sound.render())
    return EXIT_OK if all(r.matched for r in reports) else EXIT_NEGATIVE


def cmd_fmt(args) -> int:
    runtime = args.runtime or _is_runtime_file(args.file)
    subject = _load(args.file, runtime)
    if subject is None:
        return EXIT_NEGATIVE
    if isinstance(subject, S.Term):
        print(print_term(subject, unicode=args.unicode))
    else:
        print(print_config(subject, unicode=args.unicode))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cgv",
                                 description="session-typed concurrent "
                                             "functional language toolchain")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, bound_default=10_000):
        p.add_argument("file")
        p.add_argument("--json", action="store_true")
        p.add_argument("--runtime", action="store_true",
                       help="accept runtime-only syntax")
        p.add_argument("--type", default=None,
                       help="expected configuration type (default 1)")
        p.add_argument("--loose-contexts", action="store_true",
                       help="use unrestricted thread contexts for selects "
                            "and branches")
        p.add_argument("--bound", type=int, default=bound_default)

    p = sub.add_parser("check", help="typecheck a file")
    common(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("run", help="reduce a file")
    common(p)
    p.add_argument("--scheduler", choices=["det", "rand", "exhaustive"],
                   default="det")
    p.add_argument("--fuel", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--both-orders", action="store_true",
                   help="enumerate both pair-substitution orders")
    p.add_argument("--unchecked", action="store_true",
                   help="skip typechecking before running")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("translate", help="translate a configuration")
    common(p)
    p.add_argument("--annotate-priorities", action="store_true")
    p.set_defaults(fn=cmd_translate)

    p = sub.add_parser("certify", help="certify deadlock-freedom")
    common(p, bound_default=5000)
    p.add_argument("--audit", action="store_true",
                   help="exhaustively confirm progress after certification")
    p.set_defaults(fn=cmd_certify)

    p = sub.add_parser("correspond", help="check operational correspondence")
    common(p, bound_default=40)
    p.add_argument("--sound-probe", action="store_true",
                   help="also probe soundness under the lazy semantics")
    p.set_defaults(fn=cmd_correspond)

    p = sub.add_parser("fmt", help="parse and pretty-print")
    common(p)
    p.add_argument("--unicode", action="store_true")
    p.set_defaults(fn=cmd_fmt)
    return ap


def main(argv=None) -> int:
    reset_supply()  # identical invocations print identical names
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (surface.ParseError,) as e:
        print(e.diagnostic.render(args.file), file=sys.stderr)
        return EXIT_NEGATIVE
    except BrokenPipeError:
        return EXIT_OK
    except Exception as e:  # internal errors are exit code 1
        print(f"error | internal | - | {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
