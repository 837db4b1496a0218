"""Command-line entry point: ``dicey <command> ...``.

Exit codes: 0 success (or threshold YES), 3 threshold NO_WITHIN_SEARCH,
2 usage or input error, 1 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .allocator import allocate_solve, count_structures
from .families import (
    ALPHA,
    BETA,
    build_conjecture_strategy,
    conjectured_value,
    gen_clique_mp,
)
from .fritzjohn import certify_fritz_john
from .game import (
    GameError,
    _canonical,
    parse_game,
    parse_pack,
    serialize_game,
    serialize_pack,
    structure_to_list,
)
from .optimizer import SolverOptions, check_threshold, solve
from .reductions import encode_dqbf, encode_quad, parse_dqbf, parse_quad
from .schemes import DEFAULT_BUDGET, BudgetExceeded, scheme_of_strategy
from .slicer import normalize
from .smt import configured_solver, emit_fixed_scheme, emit_full, run_solver, validate_smtlib
from .strategy import (
    eval_to_dict,
    evaluate,
    monte_carlo,
    number_to_json,
    parse_strategy,
    serialize_strategy,
    strategy_to_dict,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_NO = 3

log = logging.getLogger("diceygames")


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _emit(doc: dict, args) -> None:
    _write(getattr(args, "output", None), _canonical(doc))


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _opts(args) -> SolverOptions:
    return SolverOptions(
        k=args.k, starts=args.starts, iters=args.iters, seed=args.seed,
        budget=args.budget, force=args.force,
    )


def _constants() -> dict:
    return {"alpha": ALPHA, "beta": BETA}


def _search_doc(dg, res) -> dict:
    return {
        "value": res.value,
        "per_action": res.per_action,
        "scheme_index": res.scheme_index,
        "mode": res.mode,
        "stats": res.stats,
        "strategy": strategy_to_dict(dg, res.strategy),
    }


# --- commands ----------------------------------------------------------------


def cmd_solve(args) -> int:
    dg = parse_game(_read(args.game))
    res = solve(dg, args.mode, _opts(args))
    if args.strategy_out:
        Path(args.strategy_out).write_text(serialize_strategy(dg, res.strategy))
    _emit(_search_doc(dg, res), args)
    return EXIT_OK


def cmd_eval(args) -> int:
    dg = parse_game(_read(args.game))
    s = parse_strategy(dg, _read(args.strategy))
    _emit(eval_to_dict(evaluate(dg, s, args.exact)), args)
    return EXIT_OK


def cmd_mc(args) -> int:
    dg = parse_game(_read(args.game))
    s = parse_strategy(dg, _read(args.strategy))
    est = monte_carlo(dg, s, args.samples, args.seed, args.jobs)
    doc = {
        "seed": est.seed,
        "per_action": {
            b: {"mean": m, "stderr": se, "samples": n} for b, (m, se, n) in est.per_action.items()
        },
    }
    _emit(doc, args)
    return EXIT_OK


def cmd_normalize(args) -> int:
    dg = parse_game(_read(args.game))
    s = parse_strategy(dg, _read(args.strategy))
    out = normalize(dg, s)
    _write(args.output, serialize_strategy(dg, out))
    return EXIT_OK


def cmd_threshold(args) -> int:
    dg = parse_game(_read(args.game))
    ans = check_threshold(dg, args.t, args.mode, _opts(args))
    if ans.yes and args.witness:
        Path(args.witness).write_text(serialize_strategy(dg, ans.best.strategy))
    doc = {
        "verdict": ans.verdict,
        "threshold": number_to_json(args.t),
        "best_value": ans.best.value,
        "best_per_action": ans.best.per_action,
    }
    if ans.yes:
        doc["witness"] = strategy_to_dict(dg, ans.best.strategy)
    _emit(doc, args)
    return EXIT_OK if ans.yes else EXIT_NO


def cmd_certify(args) -> int:
    dg = parse_game(_read(args.game))
    s = parse_strategy(dg, _read(args.strategy))
    scheme, lam = scheme_of_strategy(dg, s, args.k)
    t = float(args.t) if args.t is not None else float(evaluate(dg, s).value)
    cert = certify_fritz_john(dg, scheme, lam, t, lam.shape[1])
    doc = cert.to_dict()
    doc["t"] = t
    _emit(doc, args)
    return EXIT_OK


def cmd_allocate(args) -> int:
    dg = parse_game(_read(args.game))
    pack = parse_pack(_read(args.pack))
    res = allocate_solve(dg.game, pack, args.mode, _opts(args), args.individual_dice)
    doc = {
        "value": res.value,
        "dice": structure_to_list(res.best_structure),
        "structures_examined": res.structures_examined,
        "canonical_count": count_structures(dg.game, pack),
        "log": [{"structure": [list(s) for s in form], "value": v}
                for form, v in res.per_structure_log],
    }
    if res.best is not None:
        doc["strategy"] = strategy_to_dict(
            dg.with_structure(res.best_structure), res.best.strategy
        )
    _emit(doc, args)
    return EXIT_OK


def cmd_export_smt(args) -> int:
    dg = parse_game(_read(args.game))
    if args.strategy:
        s = parse_strategy(dg, _read(args.strategy))
        scheme, _ = scheme_of_strategy(dg, s, args.k)
        text = emit_fixed_scheme(dg, scheme, args.t, args.k or max(s.grid_size, 1))
    else:
        text = emit_full(dg, args.k or len(dg.devil_actions), args.t)
    errors = validate_smtlib(text)
    if errors:
        raise RuntimeError("emitted document failed validation: " + "; ".join(errors))
    _write(args.output, text)
    if args.check:
        solver = args.solver or configured_solver()
        if not solver:
            raise UsageError("--check needs --solver or DICEY_SMT_SOLVER")
        print(run_solver(text, solver), file=sys.stderr)
    return EXIT_OK


def cmd_reduce(args) -> int:
    text = _read(args.input)
    if args.kind == "dqbf":
        dg, t = encode_dqbf(parse_dqbf(text))
    else:
        dg, t = encode_quad(parse_quad(text))
    _write(args.output, serialize_game(dg))
    print(f"threshold {t}", file=sys.stderr)
    return EXIT_OK


def cmd_gen(args) -> int:
    dg, pack = gen_clique_mp(args.n)
    _write(args.output, serialize_game(dg))
    if args.pack_out:
        Path(args.pack_out).write_text(serialize_pack(pack))
    return EXIT_OK


def cmd_conjecture(args) -> int:
    rows = []
    for n in args.n:
        if n < 2:
            raise UsageError("n must be >= 2")
        dg = gen_clique_mp(n)[0]
        ev = evaluate(dg, build_conjecture_strategy(n, dg))
        target = conjectured_value(n)
        if isinstance(target, Fraction) and ev.arithmetic_mode == "exact-rational":
            match = ev.value == target
        else:
            match = abs(float(ev.value) - float(target)) <= args.tol
        rows.append({
            "n": n,
            "conjectured": number_to_json(target),
            "conjectured_float": float(target),
            "evaluated": number_to_json(ev.value),
            "evaluated_float": float(ev.value),
            "arithmetic_mode": ev.arithmetic_mode,
            "match": bool(match),
        })
    doc = {"constants": _constants(), "results": rows,
           "note": "strategy values only; optimality is not claimed"}
    if args.json:
        _emit(doc, args)
    else:
        for r in rows:
            status = "match" if r["match"] else "MISMATCH"
            print(f"n={r['n']}: conjectured {r['conjectured']} ({r['conjectured_float']:.9f}), "
                  f"evaluated {r['evaluated_float']:.9f} [{status}]")
    return EXIT_OK if all(r["match"] for r in rows) else EXIT_INTERNAL


# --- parser ------------------------------------------------------------------


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=None, help="pieces per die (default |A_Devil|)")
    p.add_argument("--mode", choices=("exhaustive", "hybrid", "auto"), default="auto")
    p.add_argument("--starts", type=int, default=32)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--force", action="store_true", help="ignore the scheme budget")
    p.add_argument("--jobs", type=int, default=1, help="accepted for uniformity; solves run serially")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("--seed", type=int, default=0)
    parser = argparse.ArgumentParser(prog="dicey", description="Dicey games toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    p = command("solve", help="search the best k-grid strategy")
    p.add_argument("game")
    _solver_flags(p)
    p.add_argument("-o", "--output")
    p.add_argument("--strategy-out")
    p.set_defaults(func=cmd_solve)

    p = command("eval", help="exact per-action expectations of a strategy")
    p.add_argument("game")
    p.add_argument("strategy")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--exact", dest="exact", action="store_true", default=None)
    g.add_argument("--float", dest="exact", action="store_false")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_eval)

    p = command("mc", help="Monte Carlo estimate of a strategy")
    p.add_argument("game")
    p.add_argument("strategy")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_mc)

    p = command("normalize", help="reshape a grid strategy to |A_Devil| pieces per die")
    p.add_argument("game")
    p.add_argument("strategy")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_normalize)

    p = command("threshold", help="look for a strategy of value >= t")
    p.add_argument("game")
    p.add_argument("-t", type=_rational, required=True)
    _solver_flags(p)
    p.add_argument("-w", "--witness", help="write the witness strategy here")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_threshold)

    p = command("certify", help="Fritz John certificate for a grid strategy")
    p.add_argument("game")
    p.add_argument("strategy")
    p.add_argument("-t", type=_rational, default=None, help="default: the strategy's value")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_certify)

    p = command("allocate", help="best dice structure for a dice pack")
    p.add_argument("game", help="game document (dice, if any, are ignored)")
    p.add_argument("pack")
    _solver_flags(p)
    p.add_argument("--individual-dice", action="store_true",
                   help="give every player a private die besides the pack")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_allocate)

    p = command("export-smt", help="emit an SMT-LIB threshold query")
    p.add_argument("game")
    p.add_argument("-t", type=_rational, required=True)
    p.add_argument("--strategy", help="fix the scheme of this strategy")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--check", action="store_true", help="run the external solver")
    p.add_argument("--solver", help="solver command (default: $DICEY_SMT_SOLVER)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export_smt)

    p = command("reduce", help="encode DQBF or a quadratic system as a game")
    p.add_argument("kind", choices=("dqbf", "quad"))
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_reduce)

    p = command("gen", help="generate example games")
    p.add_argument("family", choices=("clique-mp",))
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-o", "--output")
    p.add_argument("--pack-out")
    p.set_defaults(func=cmd_gen)

    p = command("conjecture-check", help="evaluate the clique conjecture strategies")
    p.add_argument("-n", type=int, nargs="+", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_conjecture)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BudgetExceeded as e:
        print(f"dicey: {e}; use --force or --mode hybrid", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, GameError, OSError, json.JSONDecodeError) as e:
        print(f"dicey: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"dicey: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
