"""SMT-LIB (QF_NRA) export of the polynomial threshold systems, plus a syntax checker.

Variables: lam_<i>_<j> is the length of piece j of the i-th die (game order), t
is the threshold. Constraint groups: nonnegativity of every piece, pieces of a
die summing to one, and E_b(lam) - t >= 0 for every Devil action b. The full
system adds Boolean selectors sel_<p>_<c>_<a> for player p choosing action a in
local cell c.
"""

from __future__ import annotations

import itertools
import os
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .game import DiceyGame, GameError
from .optimizer import _scheme_k
from .schemes import Scheme, SchemeSpace

SOLVER_ENV = "DICEY_SMT_SOLVER"

NONNEG = "nonneg"
SUM_ONE = "sum-one"
PAYOFF = "payoff"
SELECT = "scheme-selection"


@dataclass
class PolySystem:
    reals: list[str]
    bools: list[str] = field(default_factory=list)
    constraints: list[tuple[str, str]] = field(default_factory=list)  # (tag, term)
    comments: list[str] = field(default_factory=list)

    def add(self, tag: str, term: str) -> None:
        self.constraints.append((tag, term))

    def to_smtlib(self) -> str:
        out = [f"; {c}" for c in self.comments]
        out.append("(set-logic QF_NRA)")
        out += [f"(declare-const {v} Real)" for v in self.reals]
        out += [f"(declare-const {v} Bool)" for v in self.bools]
        last = None
        for tag, term in self.constraints:
            if tag != last:
                out.append(f"; {tag}")
                last = tag
            out.append(f"(assert {term})")
        out.append("(check-sat)")
        out.append("(exit)")
        return "\n".join(out) + "\n"


def rational(x) -> str:
    """Exact SMT-LIB term for a rational (ints, Fractions, "p/q" strings, floats)."""
    q = Fraction(x)
    num = str(abs(q.numerator)) if q.denominator == 1 else f"(/ {abs(q.numerator)} {q.denominator})"
    return f"(- {num})" if q < 0 else num


def lam_name(i: int, j: int) -> str:
    return f"lam_{i}_{j}"


def _product(factors: list[str]) -> str:
    if not factors:
        return "1"
    if len(factors) == 1:
        return factors[0]
    return f"(* {' '.join(factors)})"


def _sum(terms: list[str]) -> str:
    if not terms:
        return "0"
    if len(terms) == 1:
        return terms[0]
    return f"(+ {' '.join(terms)})"


def _base_system(dg: DiceyGame, k: int, t) -> PolySystem:
    n = len(dg.dice)
    reals = [lam_name(i, j) for i in range(n) for j in range(k)] + ["t"]
    sys_ = PolySystem(reals)
    sys_.comments.append(f"dice: {', '.join(f'{i}={d}' for i, d in enumerate(dg.dice))}")
    sys_.comments.append(f"devil actions: {', '.join(dg.devil_actions)}")
    sys_.add("threshold", f"(= t {rational(t)})")
    for i in range(n):
        for j in range(k):
            sys_.add(NONNEG, f"(>= {lam_name(i, j)} 0)")
    for i in range(n):
        sys_.add(SUM_ONE, f"(= {_sum([lam_name(i, j) for j in range(k)])} 1)")
    return sys_


def _cell_factors(cell) -> list[str]:
    return [lam_name(i, int(j)) for i, j in enumerate(cell)]


def build_fixed_scheme(dg: DiceyGame, scheme: Scheme, t, k: int | None = None) -> PolySystem:
    k = k or _scheme_k(dg, scheme)
    space = SchemeSpace(dg, k)
    M = space.tensors(space.indexed(scheme))[0]
    sys_ = _base_system(dg, k, t)
    for b in range(len(dg.devil_actions)):
        terms = []
        for c, cell in enumerate(space.cell_index):
            mu = int(M[b, c])
            if mu:
                terms.append(_product([rational(mu)] * (mu != 1) + _cell_factors(cell)))
        sys_.add(PAYOFF, f"(>= (- {_sum(terms)} t) 0)")
    return sys_


def emit_fixed_scheme(dg: DiceyGame, scheme: Scheme, t, k: int | None = None) -> str:
    return build_fixed_scheme(dg, scheme, t, k).to_smtlib()


def sel_name(p: int, c: int, a: int) -> str:
    return f"sel_{p}_{c}_{a}"


def build_full(dg: DiceyGame, k: int, t) -> PolySystem:
    space = SchemeSpace(dg, k)
    sys_ = _base_system(dg, k, t)
    game = dg.game
    players = dg.team_players
    for pi, p in enumerate(players):
        acts = game.actions[p]
        sys_.comments.append(f"player {pi}={p}: actions {', '.join(f'{a}={x}' for a, x in enumerate(acts))}")
        for c in range(space.table_sizes[pi]):
            names = [sel_name(pi, c, a) for a in range(len(acts))]
            sys_.bools += names
            sys_.add(SELECT, f"(or {' '.join(names)})" if len(names) > 1 else names[0])
            for x, y in itertools.combinations(names, 2):
                sys_.add(SELECT, f"(not (and {x} {y}))")
    ppos = {p: i for i, p in enumerate(players)}
    devil = game.devil_id
    for b, act in enumerate(dg.devil_actions):
        rules = [
            r for r in game.payoff.rules if r.when.get(devil, act) == act
        ]
        terms = []
        for c, cell in enumerate(space.cell_index):
            local = {p: int(space.projections[i][c]) for i, p in enumerate(players)}
            expr = rational(game.payoff.default)
            for r in reversed(rules):
                conds = [
                    sel_name(ppos[p], local[p], game.actions[p].index(a))
                    for p, a in r.when.items() if p != devil
                ]
                if not conds:
                    expr = rational(r.value)
                    continue
                cond = conds[0] if len(conds) == 1 else f"(and {' '.join(conds)})"
                expr = f"(ite {cond} {rational(r.value)} {expr})"
            if expr != "0":
                terms.append(_product([expr] + _cell_factors(cell)))
        sys_.add(PAYOFF, f"(>= (- {_sum(terms)} t) 0)")
    return sys_


def emit_full(dg: DiceyGame, k: int, t) -> str:
    if k < 1:
        raise GameError("k must be >= 1")
    return build_full(dg, k, t).to_smtlib()


# --- validation --------------------------------------------------------------

_TOKEN = re.compile(
    r"""\s+|;[^\n]*|(?P<lp>\()|(?P<rp>\))|(?P<str>"(?:[^"]|"")*")|(?P<qsym>\|[^|\\]*\|)"""
    r"""|(?P<dec>[0-9]+\.[0-9]+)|(?P<num>0|[1-9][0-9]*)|(?P<kw>:[A-Za-z0-9~!@$%^&*_\-+=<>.?/]+)"""
    r"""|(?P<sym>[A-Za-z~!@$%^&*_\-+=<>.?/][A-Za-z0-9~!@$%^&*_\-+=<>.?/]*)"""
)

COMMANDS = {"set-logic", "set-info", "set-option", "declare-const", "declare-fun",
            "define-fun", "assert", "check-sat", "get-model", "get-value", "exit"}
BUILTINS = {"+", "-", "*", "/", "=", ">=", "<=", ">", "<", "and", "or", "not", "=>",
            "ite", "true", "false", "distinct", "xor"}
SORTS = {"Real", "Bool", "Int"}


def tokenize(text: str) -> list[tuple[str, str, int]]:
    """(kind, text, offset) tokens; raises GameError on characters no token matches."""
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            line = text.count("\n", 0, pos) + 1
            raise GameError(f"line {line}: unexpected character {text[pos]!r}")
        if m.lastgroup:
            out.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    return out


def _parse(tokens):
    stack = [[]]
    for kind, tok, pos in tokens:
        if kind == "lp":
            stack.append([])
        elif kind == "rp":
            if len(stack) == 1:
                raise GameError(f"offset {pos}: unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append((kind, tok))
    if len(stack) != 1:
        raise GameError("unbalanced '(' at end of input")
    return stack[0]


def validate_smtlib(text: str) -> list[str]:
    """Tokenizer-level checks: balanced parentheses, known commands, declared
    symbols, no decimal literals, a logic header and a final check-sat."""
    errors = []
    try:
        forms = _parse(tokenize(text))
    except GameError as e:
        return [str(e)]
    declared: set[str] = set()
    commands = []

    def walk(term):
        if isinstance(term, list):
            for x in term:
                walk(x)
            return
        kind, tok = term
        if kind == "dec":
            errors.append(f"decimal literal {tok}")
        elif kind == "sym" and tok not in BUILTINS and tok not in declared:
            errors.append(f"undeclared symbol {tok}")

    for form in forms:
        if not isinstance(form, list) or not form or form[0][0] != "sym":
            errors.append("top-level item is not a command")
            continue
        cmd = form[0][1]
        commands.append(cmd)
        if cmd not in COMMANDS:
            errors.append(f"unknown command {cmd}")
        elif cmd == "declare-const":
            if len(form) != 3 or form[1][0] != "sym" or form[2] not in (("sym", s) for s in SORTS):
                errors.append("malformed declare-const")
            else:
                declared.add(form[1][1])
        elif cmd == "assert":
            if len(form) != 2:
                errors.append("assert takes one term")
            else:
                walk(form[1])
    if not commands or commands[0] != "set-logic":
        errors.append("missing set-logic header")
    if "check-sat" not in commands:
        errors.append("missing check-sat")
    return errors


# --- external solver -------------------------------------------------------


def configured_solver() -> str | None:
    cmd = os.environ.get(SOLVER_ENV, "").strip()
    return cmd or None


def run_solver(document: str, solver: str | None = None, timeout: float = 120.0) -> str:
    """Run an external SMT solver on ``document``; returns sat, unsat or unknown."""
    solver = solver or configured_solver()
    if not solver:
        raise GameError(f"no SMT solver configured (set {SOLVER_ENV})")
    with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False) as fh:
        fh.write(document)
        path = fh.name
    try:
        proc = subprocess.run(shlex.split(solver) + [path], capture_output=True, text=True,
                              timeout=timeout)
    except subprocess.TimeoutExpired:
        return "unknown"
    finally:
        os.unlink(path)
    for line in proc.stdout.splitlines():
        word = line.strip()
        if word in ("sat", "unsat", "unknown"):
            return word
    raise GameError(f"solver gave no verdict: {proc.stdout.strip() or proc.stderr.strip()}")


def trivial_threshold(dg: DiceyGame) -> Fraction:
    """A threshold every strategy meets: minus the largest absolute payoff."""
    return -Fraction(int(np.abs(dg.game.flat_payoffs).max()))
