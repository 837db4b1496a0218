"""Encoders from DQBF and from quadratic inequality systems into dicey threshold instances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .game import DEFAULT_DEVIL, DiceStructure, DiceyGame, Game, GameError, PayoffRules, Rule


class ReductionError(GameError):
    pass


# --- DQBF ------------------------------------------------------------------


@dataclass(frozen=True)
class DqbfInstance:
    """forall universals, exists y_j depending on deps[y_j], conjunction of clauses.

    A literal is (variable, positive)."""

    universals: tuple[str, ...]
    existentials: tuple[str, ...]
    deps: Mapping[str, tuple[str, ...]]
    clauses: tuple[tuple[tuple[str, bool], ...], ...]

    def __post_init__(self):
        names = self.universals + self.existentials
        if len(set(names)) != len(names):
            raise ReductionError("duplicate variable")
        for y in self.existentials:
            for x in self.deps.get(y, ()):
                if x not in self.universals:
                    raise ReductionError(f"{y} depends on undeclared universal {x!r}")
        for i, c in enumerate(self.clauses):
            if not 1 <= len(c) <= 3:
                raise ReductionError(f"clause {i + 1} must have 1 to 3 literals")
            for v, _ in c:
                if v not in names:
                    raise ReductionError(f"malformed literal: unknown variable {v!r}")

    @property
    def size(self) -> int:
        return len(self.universals) + len(self.existentials)


def parse_literal(tok: str) -> tuple[str, bool]:
    neg = tok.startswith("-")
    name = tok[1:] if neg else tok
    if not name or not (name[0].isalpha() or name[0] == "_") or not all(
        ch.isalnum() or ch == "_" for ch in name
    ):
        raise ReductionError(f"malformed literal {tok!r}")
    return name, not neg


def parse_dqbf(text: str) -> DqbfInstance:
    """Lines: ``forall x1 x2``, ``exists y1 : x1``, ``clause x1 -y1``. ``#`` starts a comment."""
    universals, existentials, deps, clauses = [], [], {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if head == "forall":
            universals += [parse_literal(t)[0] for t in rest]
        elif head == "exists":
            if ":" in rest:
                cut = rest.index(":")
                names, dep = rest[:cut], rest[cut + 1:]
            else:
                names, dep = rest, []
            if len(names) != 1:
                raise ReductionError(f"line {lineno}: exists takes one variable")
            existentials.append(names[0])
            deps[names[0]] = tuple(dep)
        elif head == "clause":
            clauses.append(tuple(parse_literal(t) for t in rest))
        else:
            raise ReductionError(f"line {lineno}: unknown directive {head!r}")
    return DqbfInstance(tuple(universals), tuple(existentials), deps, tuple(clauses))


def format_dqbf(inst: DqbfInstance) -> str:
    lines = ["forall " + " ".join(inst.universals)]
    for y in inst.existentials:
        lines.append(f"exists {y} : " + " ".join(inst.deps.get(y, ())))
    for c in inst.clauses:
        lines.append("clause " + " ".join(v if pos else "-" + v for v, pos in c))
    return "\n".join(line.rstrip() for line in lines) + "\n"


def dqbf_die(x: str) -> str:
    return f"D_{x}"


def encode_dqbf(inst: DqbfInstance, devil: str = DEFAULT_DEVIL) -> tuple[DiceyGame, int]:
    """Team of one player per variable, one die per universal, threshold 1.

    Devil action rand<b>_x pays 2 when x plays b; clause action C<k> pays 1 when
    the team's actions satisfy clause k."""
    team = inst.universals + inst.existentials
    if devil in team:
        raise ReductionError(f"variable name clashes with the Devil id {devil!r}")
    rand = [f"rand{b}_{x}" for b in (0, 1) for x in inst.universals]
    clause_acts = [f"C{k}" for k in range(1, len(inst.clauses) + 1)]
    devil_actions = tuple(rand + clause_acts)
    if not devil_actions:
        raise ReductionError("instance has neither universals nor clauses")
    rules = []
    for b in (0, 1):
        for x in inst.universals:
            rules.append(Rule({devil: f"rand{b}_{x}", x: str(b)}, 2))
    for name, clause in zip(clause_acts, inst.clauses):
        for v, pos in clause:
            rules.append(Rule({devil: name, v: "1" if pos else "0"}, 1))
    actions = {p: ("0", "1") for p in team}
    actions[devil] = devil_actions
    game = Game(team, actions, PayoffRules(tuple(rules), 0), devil)
    dice = tuple(dqbf_die(x) for x in inst.universals)
    access = {
        dqbf_die(x): {x} | {y for y in inst.existentials if x in inst.deps.get(y, ())}
        for x in inst.universals
    }
    return DiceyGame(game, DiceStructure(dice, access)), 1


# --- quadratic systems -------------------------------------------------------


@dataclass(frozen=True)
class QuadSystem:
    """Inequalities sum_ij c_ij x_i x_j >= 0 over normal x (x >= 0, sum x = 1).

    Each inequality is a list of (i, j, c) triples, 1-based, integer c."""

    n: int
    inequalities: tuple[tuple[tuple[int, int, int], ...], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n < 1:
            raise ReductionError("need at least one variable")
        for q, ineq in enumerate(self.inequalities):
            for i, j, c in ineq:
                if not (1 <= i <= self.n and 1 <= j <= self.n):
                    raise ReductionError(f"inequality {q + 1}: index out of range")
                if not isinstance(c, int) or isinstance(c, bool):
                    raise ReductionError(f"inequality {q + 1}: coefficient must be an integer")

    def matrix(self, q: int) -> list[list[int]]:
        m = [[0] * self.n for _ in range(self.n)]
        for i, j, c in self.inequalities[q]:
            m[i - 1][j - 1] += c
        return m

    def evaluate(self, x: Sequence) -> list:
        out = []
        for q in range(len(self.inequalities)):
            m = self.matrix(q)
            out.append(sum(m[i][j] * x[i] * x[j] for i in range(self.n) for j in range(self.n)))
        return out


def parse_quad(text: str) -> QuadSystem:
    """``vars n`` then ``ineq`` lines, each followed by ``i j c`` triples (same line or after)."""
    n = None
    ineqs: list[list[tuple[int, int, int]]] = []
    pending: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if toks[0] == "vars":
            if len(toks) != 2:
                raise ReductionError(f"line {lineno}: expected 'vars n'")
            n = int(toks[1])
            continue
        if toks[0] == "ineq":
            if pending:
                raise ReductionError(f"line {lineno}: incomplete triple")
            ineqs.append([])
            toks = toks[1:]
        if not ineqs:
            raise ReductionError(f"line {lineno}: coefficients before any 'ineq'")
        try:
            pending += [int(t) for t in toks]
        except ValueError:
            raise ReductionError(f"line {lineno}: expected integers") from None
        while len(pending) >= 3:
            i, j, c = pending[:3]
            del pending[:3]
            ineqs[-1].append((i, j, c))
    if n is None:
        raise ReductionError("missing 'vars n'")
    if pending:
        raise ReductionError("incomplete triple at end of input")
    return QuadSystem(n, tuple(tuple(q) for q in ineqs))


def format_quad(sys: QuadSystem) -> str:
    lines = [f"vars {sys.n}"]
    for ineq in sys.inequalities:
        lines.append("ineq " + "  ".join(f"{i} {j} {c}" for i, j, c in ineq))
    return "\n".join(line.rstrip() for line in lines) + "\n"


QUAD_PLAYERS = ("ada", "bertrand")


def encode_quad(sys: QuadSystem, devil: str = DEFAULT_DEVIL) -> tuple[DiceyGame, int]:
    """Two players choosing a variable each, private dice, threshold 0.

    le_i pays -1 when only the first player picks x_i and +1 when only the
    second does; ge_i is the opposite; inequality I pays c^I_ij on (x_i, x_j)."""
    a, b = QUAD_PLAYERS
    xs = tuple(f"x{i}" for i in range(1, sys.n + 1))
    ineq_acts = [f"I{q}" for q in range(1, len(sys.inequalities) + 1)]
    devil_actions = tuple([f"le_{i}" for i in range(1, sys.n + 1)]
                          + [f"ge_{i}" for i in range(1, sys.n + 1)] + ineq_acts)
    rules = []
    for sign, tag in ((1, "le"), (-1, "ge")):
        for i, x in enumerate(xs, 1):
            act = f"{tag}_{i}"
            rules.append(Rule({devil: act, a: x, b: x}, 0))
            rules.append(Rule({devil: act, a: x}, -sign))
            rules.append(Rule({devil: act, b: x}, sign))
    for q, act in enumerate(ineq_acts):
        m = sys.matrix(q)
        for i in range(sys.n):
            for j in range(sys.n):
                if m[i][j]:
                    rules.append(Rule({devil: act, a: xs[i], b: xs[j]}, m[i][j]))
    game = Game((a, b), {a: xs, b: xs, devil: devil_actions}, PayoffRules(tuple(rules), 0), devil)
    structure = DiceStructure(("D_ada", "D_bertrand"), {"D_ada": {a}, "D_bertrand": {b}})
    return DiceyGame(game, structure), 0

