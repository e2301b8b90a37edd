"""The `bi` command line: batch proving, checking, and model evaluation.

Exit statuses: prove 0=proved 1=unproven; check-proof and meta-check
0=valid 1=invalid; countermodel 0=found 1=not found; bisim 0=bisimilar
1=mismatch; eval 0=valid in the model 1=refuted; any usage, parse, or
budget error exits 2.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import search, semantics, vbi
from .calculus import SearchPolicy, check_proof, load_proof, save_proof
from .metalogic import check_dlj, load_derivation, save_derivation, world_conservative
from .syntax import BiSyntaxError, parse_sequent, sequent_str, sequent_formulas


class CliError(Exception):
    pass


def _policy(args, depth_default: int = 8) -> SearchPolicy:
    return SearchPolicy(
        depth=getattr(args, "depth", None) or depth_default,
        include_cut=getattr(args, "cut", False),
        loop_check=not getattr(args, "no_loop_check", False),
        node_cap=getattr(args, "node_cap", None) or 10 ** 6,
    )


def _emit(args, payload: dict, text: str) -> None:
    if getattr(args, "json", False):
        json.dump(payload, sys.stdout, sort_keys=True)
        sys.stdout.write("\n")
    else:
        print(text)


def cmd_prove(args) -> int:
    s = parse_sequent(args.sequent)
    policy = _policy(args)
    if args.system == "slbi":
        result = search.prove(s, policy)
        proved = not isinstance(result, search.Unproven)
        if proved and args.emit:
            save_proof(result, args.emit)
    else:
        result = vbi.vbi_prove(s, policy)
        proved = not isinstance(result, search.Unproven)
        if proved and args.emit:
            save_derivation(vbi.certify_vproof(result), args.emit)
    if proved:
        size = result.size()
        _emit(args, {"status": "proved", "system": args.system, "nodes": size,
                     "sequent": sequent_str(s)},
              f"proved ({args.system}, {size} nodes)")
        return 0
    _emit(args, {"status": "unproven", "reason": result.reason,
                 "depth": policy.depth, "sequent": sequent_str(s)},
          f"unproven at depth {policy.depth} ({result.reason})")
    return 1


def cmd_check_proof(args) -> int:
    proof = load_proof(args.file)
    res = check_proof(proof)
    if res.ok:
        _emit(args, {"status": "valid", "nodes": proof.size()}, "proof is valid")
        return 0
    _emit(args, {"status": "invalid", "path": list(res.path), "reason": res.reason},
          f"invalid at {list(res.path)}: {res.reason}")
    return 1


def cmd_meta_check(args) -> int:
    deriv = load_derivation(args.file)
    res = check_dlj(deriv, classical=args.classical)
    conservative = world_conservative(deriv)
    if res.ok:
        _emit(args, {"status": "valid", "nodes": deriv.size(),
                     "world_conservative": conservative},
              f"derivation is valid (world-conservative: {conservative})")
        return 0
    _emit(args, {"status": "invalid", "path": list(res.path), "reason": res.reason},
          f"invalid at {list(res.path)}: {res.reason}")
    return 1


def cmd_space(args) -> int:
    s = parse_sequent(args.sequent)
    policy = _policy(args, depth_default=3)
    sp = search.space(s, policy)
    dot = search.space_to_dot(sp)
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(dot + "\n")
    else:
        print(dot)
    if args.png:
        search.render_space_png(sp, args.png)
    if args.json:
        json.dump({"nodes": sp.nodes, "depth": sp.depth}, sys.stdout, sort_keys=True)
        sys.stdout.write("\n")
    return 0


def cmd_countermodel(args) -> int:
    s = parse_sequent(args.sequent)
    if not hasattr(s, "context"):
        raise CliError("the empty sequent has no countermodel")
    cm = semantics.countermodel(s, max_size=args.max_size)
    if cm is None:
        _emit(args, {"status": "not-found", "max_size": args.max_size},
              f"no countermodel up to size {args.max_size}")
        return 1
    if args.emit:
        semantics.save_model(cm.model, args.emit)
    _emit(args, {"status": "found", "world": cm.world,
                 "model": semantics.model_to_dict(cm.model)},
          f"countermodel with {len(cm.model.frame.worlds)} worlds, refuted at {cm.world}")
    return 0


def cmd_eval(args) -> int:
    s = parse_sequent(args.sequent)
    model = semantics.load_model(args.model)
    fs = sequent_formulas(s)
    ok, bad = semantics.check_model(model, fs)
    if not ok:
        raise CliError("the model fails its own conditions: " + "; ".join(bad[:3]))
    if semantics.valid_in(model, s):
        _emit(args, {"status": "valid"}, "valid in the model")
        return 0
    w = semantics.refuting_world(model, s)
    _emit(args, {"status": "refuted", "world": w}, f"refuted at world {w}")
    return 1


def cmd_bisim(args) -> int:
    s = parse_sequent(args.sequent)
    res = vbi.bisim_check(s, depth=args.depth or 4)
    payload = {
        "status": "bisimilar" if res.bisimilar else "mismatch",
        "pairs": res.sequents_checked,
        "mismatches": [
            {"state": r.state,
             "provability_only": r.unmatched_provability,
             "validity_only": r.unmatched_validity,
             "spot_checks": r.spot_check_failures}
            for r in res.reports
            if r.unmatched_provability or r.unmatched_validity or r.spot_check_failures
        ],
    }
    _emit(args, payload, res.summary())
    return 0 if res.bisimilar else 1


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="bi",
        description="Proof search and semantic validity workbench for bunched implications")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, sequent=True):
        if sequent:
            p.add_argument("sequent", help='e.g. "p ; p -> q |- q"')
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--jobs", type=int, default=1, metavar="N",
                       help="worker cap (execution is deterministic regardless)")

    p = sub.add_parser("prove", help="bounded proof search")
    common(p)
    p.add_argument("--system", choices=("slbi", "vbi"), default="slbi")
    p.add_argument("--depth", type=int, metavar="N")
    p.add_argument("--cut", action="store_true", help="include the cut rule")
    p.add_argument("--no-loop-check", action="store_true")
    p.add_argument("--node-cap", type=int, metavar="N")
    p.add_argument("--emit", metavar="PATH",
                   help="write the proof (.biproof.json) or, for vbi, its meta-derivation (.bideriv.json)")
    p.set_defaults(fn=cmd_prove)

    p = sub.add_parser("check-proof", help="validate a stored proof object")
    p.add_argument("file", help="a .biproof.json file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_check_proof)

    p = sub.add_parser("meta-check", help="validate a stored meta-derivation")
    p.add_argument("file", help="a .bideriv.json file")
    p.add_argument("--classical", action="store_true", default=True,
                   help="accept the classically admissible rules (default)")
    p.add_argument("--intuitionistic", dest="classical", action="store_false")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_meta_check)

    p = sub.add_parser("space", help="materialize a proof-search space")
    common(p)
    p.add_argument("--depth", type=int, metavar="N")
    p.add_argument("--node-cap", type=int, metavar="N")
    p.add_argument("--dot", metavar="PATH", help="write DOT here instead of stdout")
    p.add_argument("--png", metavar="PATH", help="also render the tree as a figure")
    p.set_defaults(fn=cmd_space)

    p = sub.add_parser("countermodel", help="search monoid-generated models")
    common(p)
    p.add_argument("--max-size", type=int, default=4, metavar="N")
    p.add_argument("--emit", metavar="PATH", help="write the model file")
    p.set_defaults(fn=cmd_countermodel)

    p = sub.add_parser("eval", help="evaluate a sequent in a model file")
    common(p)
    p.add_argument("--model", required=True, metavar="PATH")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("bisim", help="lockstep provability/validity comparison")
    common(p)
    p.add_argument("--depth", type=int, metavar="N")
    p.set_defaults(fn=cmd_bisim)

    return top


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except BiSyntaxError as exc:
        print(f"syntax error: {exc}", file=sys.stderr)
        return 2
    except (search.SearchBudgetExceeded, semantics.EnumerationBudgetExceeded) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 2
    except (CliError, semantics.ModelError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
