"""Command line front door.

Subcommands: check | eval | extract | analyze | verify.  Exit codes: 0 on
success, 1 on an analysis failure or counterexample, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import source_ast as S
from .cost_eval import eval_expr, program_env
from .extract import extract_program, potential_type
from .harness import TrialConfig, verify_bound, DEFAULT_MODELS, prepare, apply_bound
from .models import (
    MODEL_NAMES, galois_abs, galois_conc, make_model, value_potential,
)
from .rec_lang import RInd, pretty_rec, pretty_rec_type, simplify
from .semdom import SMap, SNum, SizeMap, ext, INF
from .typecheck import SrcTypeError, check_program


def _load(path: str):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise SystemExit(f"costrec: cannot read {path}: {exc}")
    program = S.parse_program(text)
    return program, check_program(program)


def _scheme_str(scheme: S.TypeScheme) -> str:
    body = S.pretty_type(scheme.body)
    if scheme.bound:
        return f"forall {', '.join(scheme.bound)}. {body}"
    return body


def cmd_check(args) -> int:
    program, checked = _load(args.file)
    if args.json:
        doc = {name: _scheme_str(s) for name, s in checked.schemes.items()}
        if checked.main_type is not None:
            doc["main"] = S.pretty_type(checked.main_type)
        print(json.dumps(doc, sort_keys=True, indent=2))
    else:
        for name, scheme in checked.schemes.items():
            print(f"{name} : {_scheme_str(scheme)}")
        if checked.main_type is not None:
            print(f"main : {S.pretty_type(checked.main_type)}")
    return 0


def cmd_eval(args) -> int:
    program, checked = _load(args.file)
    env, _ = program_env(program)
    if args.main:
        expr = S.Var(args.main)
    elif program.main is not None:
        expr = program.main
    else:
        print("costrec: no main expression; use --main NAME", file=sys.stderr)
        return 2
    result = eval_expr(env, expr)
    if args.json:
        print(json.dumps({"value": S.pretty(result.value), "cost": result.cost},
                         sort_keys=True, indent=2))
    else:
        print(f"value: {S.pretty(result.value)}")
        print(f"cost:  {result.cost}")
    return 0


def cmd_extract(args) -> int:
    program, checked = _load(args.file)
    ex = extract_program(checked)
    doc = {}
    for name, binding in ex.bindings.items():
        term = binding.complexity
        if args.simplify:
            term = simplify(term)
        doc[name] = {
            "recurrence": pretty_rec(term),
            "type": pretty_rec_type(binding.complexity_ty),
        }
    if args.json:
        print(json.dumps(doc, sort_keys=True, indent=2))
    else:
        for name, entry in doc.items():
            print(f"-- {name} : {entry['type']}")
            print(f"{name} = {entry['recurrence']}")
            print()
    return 0


def _parse_at(token: str, model, arg_src_ty, program) -> object:
    """An input potential: a plain natural or 'inf' for the counting models,
    a {name: n, ...} map for allcons, a source value literal for exact.
    """
    pot_ty = potential_type(arg_src_ty)
    token = token.strip()
    if model.name == "exact":
        expr = S.parse_expr(token, program.datatypes)
        value = eval_expr(S.EMPTY_ENV, expr).value
        return value_potential(model, value, arg_src_ty)
    if token in ("inf", "top"):
        return model.top(pot_ty)
    if token.startswith("{"):
        entries = {}
        body = token.strip("{}").strip()
        if body:
            for item in body.split(","):
                key, _, num = item.partition(":")
                key_ty = potential_type(S.parse_type(key.strip(), program.datatypes))
                entries[key_ty] = INF if num.strip() in ("inf", "top") else ext(int(num))
        return SMap(SizeMap.of(entries))
    n = ext(int(token))
    if model.name in ("allcons", "merged"):
        if not isinstance(pot_ty, RInd):
            raise SystemExit(f"costrec: numeric potential needs an inductive argument type")
        return galois_conc(pot_ty, SNum("size", n))
    if not isinstance(pot_ty, RInd):
        raise SystemExit(f"costrec: numeric potential needs an inductive argument type")
    return SNum("size", n)


def _show_potential(model, pot, arg_ty) -> str:
    if model.name == "merged":
        pot_ty = potential_type(arg_ty)
        try:
            return f"{pot} (main count {galois_abs(pot_ty, pot)})"
        except Exception:
            return str(pot)
    return str(pot)


def cmd_analyze(args) -> int:
    program, checked = _load(args.file)
    model = make_model(args.model)
    inst = S.parse_type(args.inst, program.datatypes) if args.inst else None
    prepared = prepare(checked, args.fn, (args.model,), instantiate_at=inst)
    if args.model in prepared.skipped:
        print(f"costrec: model {args.model} rejects {args.fn}: "
              f"{prepared.skipped[args.model]}", file=sys.stderr)
        return 1
    model, base_cost, pot = prepared.denoted[args.model]
    tokens = []
    for chunk in args.at or []:
        tokens.extend(t for t in chunk.split(";") if t.strip())
    if len(tokens) != len(prepared.arg_types):
        print(f"costrec: {args.fn} takes {len(prepared.arg_types)} argument(s); "
              f"got {len(tokens)} via --at (separate multiple with ';')",
              file=sys.stderr)
        return 2
    arg_pots = [
        _parse_at(tok, model, ty, program)
        for tok, ty in zip(tokens, prepared.arg_types)
    ]
    cost, final = apply_bound(model, base_cost, pot, arg_pots)
    shown = _show_potential(model, final, prepared.result_type)
    if args.json:
        print(json.dumps({
            "fn": args.fn,
            "model": args.model,
            "at": tokens,
            "cost": str(cost),
            "potential": str(final),
        }, sort_keys=True, indent=2))
    else:
        print(f"{args.fn} in the {args.model} model at ({', '.join(tokens)}):")
        print(f"  cost bound: {cost}")
        print(f"  potential:  {shown}")
    return 0


def cmd_verify(args) -> int:
    program, checked = _load(args.file)
    fn = args.fn or (program.bindings[-1][0] if program.bindings else None)
    if fn is None:
        print("costrec: nothing to verify", file=sys.stderr)
        return 2
    models = tuple(args.model) if args.model else DEFAULT_MODELS
    cfg = TrialConfig(trials=args.trials, max_value_size=args.max_size,
                      models=models, seed=args.seed)
    report = verify_bound(checked, fn, cfg, program_name=args.file)
    if args.json:
        print(report.to_json())
    else:
        print(report.summary())
    return 0 if report.passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="costrec",
        description="Extract cost/size recurrences and verify them against the evaluator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="type check a program")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("eval", help="evaluate main (or a binding) and report cost")
    p.add_argument("file")
    p.add_argument("--main", help="name of the binding to evaluate")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("extract", help="print the extracted recurrences")
    p.add_argument("file")
    p.add_argument("--simplify", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("analyze", help="denote a recurrence at given input potentials")
    p.add_argument("file")
    p.add_argument("--model", required=True, choices=MODEL_NAMES)
    p.add_argument("--fn", required=True, dest="fn_name")
    p.add_argument("--at", action="append",
                   help="input potentials, one per argument (repeat or separate with ';')")
    p.add_argument("--inst", help="type to instantiate polymorphic functions at (default nat)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("verify", help="empirically check bounds on random inputs")
    p.add_argument("file")
    p.add_argument("--fn", dest="fn_name2", help="binding to verify (default: last)")
    p.add_argument("--model", action="append", choices=MODEL_NAMES,
                   help="model(s) to check (default: all)")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-size", type=int, default=12)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_verify)

    args = parser.parse_args(argv)
    command = args.fn
    # untangle the naming collision between the handler and --fn options
    if hasattr(args, "fn_name"):
        args.fn = args.fn_name
    if hasattr(args, "fn_name2"):
        args.fn = args.fn_name2
    try:
        return command(args)
    except (S.SourceError, SrcTypeError) as exc:
        if getattr(args, "json", False):
            doc = {"error": exc.msg, "line": exc.line, "column": exc.col}
            print(json.dumps(doc, sort_keys=True, indent=2), file=sys.stderr)
        else:
            print(f"costrec: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
