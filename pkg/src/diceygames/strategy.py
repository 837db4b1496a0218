"""Grid strategies: validation, exact evaluation, roll-level play and Monte Carlo."""

from __future__ import annotations

import itertools
import json
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Mapping, Sequence

import numpy as np

from .game import DiceyGame, GameError, GameSemanticError, ValidationReport, _loads

Number = Fraction | float

EXACT = "exact-rational"
FLOATING = "floating"

MC_CHUNK = 1 << 16


class StrategyError(GameError):
    pass


@dataclass(frozen=True)
class PlayerTable:
    """Action per cell; a cell is a tuple of piece indices, one per die in ``dice``."""

    dice: tuple[str, ...]
    cells: Mapping[tuple[int, ...], str]


@dataclass(frozen=True, eq=False)
class GridStrategy:
    cuts: Mapping[str, tuple]
    tables: Mapping[str, PlayerTable]

    def __post_init__(self):
        object.__setattr__(self, "cuts", {d: tuple(v) for d, v in self.cuts.items()})

    def __eq__(self, other):
        if not isinstance(other, GridStrategy):
            return NotImplemented
        return dict(self.cuts) == dict(other.cuts) and dict(self.tables) == dict(other.tables)

    __hash__ = None

    def pieces(self, die: str) -> int:
        return len(self.cuts[die])

    @property
    def grid_size(self) -> int:
        """Smallest k for which the strategy is k-grid."""
        return max((len(v) for v in self.cuts.values()), default=1)

    @property
    def is_exact(self) -> bool:
        return all(_is_exact(x) for v in self.cuts.values() for x in v)

    def action(self, player: str, cell: Mapping[str, int]) -> str:
        t = self.tables[player]
        return t.cells[tuple(cell[d] for d in t.dice)]

    @classmethod
    def from_function(
        cls,
        dg: DiceyGame,
        cuts: Mapping[str, Sequence],
        rule: Callable[[str, Mapping[str, int]], str],
    ) -> "GridStrategy":
        """Build tables over each player's accessible dice from ``rule(player, cell)``,
        where ``cell`` maps each accessible die to a 0-based piece index."""
        tables = {}
        for p in dg.team_players:
            dice = dg.accessible(p)
            cells = {}
            for idx in itertools.product(*(range(len(cuts[d])) for d in dice)):
                cells[idx] = rule(p, dict(zip(dice, idx)))
            tables[p] = PlayerTable(dice, cells)
        return cls(cuts, tables)


@dataclass(frozen=True)
class EvalResult:
    per_action: dict
    value: Number
    arithmetic_mode: str


@dataclass(frozen=True)
class McEstimate:
    per_action: dict  # devil action -> (mean, stderr, count)
    seed: int


def _is_exact(x) -> bool:
    return isinstance(x, Rational) and not isinstance(x, bool)


def as_number(x) -> Number:
    """Coerce a document value: ints and "p/q" strings are exact, floats stay floats."""
    if isinstance(x, bool):
        raise StrategyError("piece length cannot be boolean")
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError):
            raise StrategyError(f"bad rational {x!r}") from None
    if isinstance(x, float):
        return x
    raise StrategyError(f"bad piece length {x!r}")


def validate_strategy(dg: DiceyGame, s: GridStrategy, tol: float = 1e-9) -> ValidationReport:
    report = ValidationReport()
    for d in dg.dice:
        if d not in s.cuts:
            report.add(f"die {d!r}: no cut vector")
    for d, lam in s.cuts.items():
        if d not in dg.dice:
            report.add(f"die {d!r}: not a die of the game")
            continue
        if not lam:
            report.add(f"die {d!r}: empty cut vector")
            continue
        for j, x in enumerate(lam):
            if x < 0:
                report.add(f"die {d!r}: piece {j} has negative length {x}")
        total = sum(lam)
        if all(_is_exact(x) for x in lam):
            if total != 1:
                report.add(f"die {d!r}: piece lengths sum to {total}, not 1")
        elif abs(total - 1) > tol:
            report.add(f"die {d!r}: piece lengths sum to {total}, not 1")
    for p in dg.team_players:
        if p not in s.tables:
            report.add(f"player {p!r}: no table")
    for p, table in s.tables.items():
        if p not in dg.team_players:
            report.add(f"player {p!r}: not a team player")
            continue
        allowed = set(dg.accessible(p))
        bad = [d for d in table.dice if d not in allowed]
        if bad:
            report.add(f"player {p!r}: table indexed by inaccessible dice {bad} (measurability)")
            continue
        if any(d not in s.cuts for d in table.dice) or len(set(table.dice)) != len(table.dice):
            report.add(f"player {p!r}: table dice {list(table.dice)} invalid")
            continue
        acts = set(dg.game.actions[p])
        for idx in itertools.product(*(range(len(s.cuts[d])) for d in table.dice)):
            a = table.cells.get(idx)
            if a is None:
                report.add(f"player {p!r}: missing cell {idx}")
            elif a not in acts:
                report.add(f"player {p!r}: cell {idx} has undeclared action {a!r}")
        for idx in table.cells:
            if len(idx) != len(table.dice) or any(
                not 0 <= i < len(s.cuts[d]) for i, d in zip(idx, table.dice)
            ):
                report.add(f"player {p!r}: cell {idx} out of range")
    return report


def _require_valid(dg: DiceyGame, s: GridStrategy) -> None:
    report = validate_strategy(dg, s)
    if not report.ok:
        raise StrategyError("invalid strategy: " + "; ".join(report.violations))


def joint_masses(dg: DiceyGame, s: GridStrategy, exact: bool) -> dict[int, Number]:
    """Probability mass of each joint team action index (naive cell product)."""
    dice = dg.dice
    players = dg.team_players
    strides = dg.game.joint_strides
    pos = {d: i for i, d in enumerate(dice)}
    lookups = []
    for p, st in zip(players, strides):
        t = s.tables[p]
        acts = dg.game.actions[p]
        lookups.append(
            ([pos[d] for d in t.dice], {c: acts.index(a) * st for c, a in t.cells.items()})
        )
    lams = [
        [Fraction(x) for x in s.cuts[d]] if exact else [float(x) for x in s.cuts[d]]
        for d in dice
    ]
    one = Fraction(1) if exact else 1.0
    out: dict[int, Number] = {}
    for cell in itertools.product(*(range(len(l)) for l in lams)):
        mass = one
        for lam, j in zip(lams, cell):
            mass = mass * lam[j]
        if not mass:
            continue
        joint = 0
        for idxs, table in lookups:
            joint += table[tuple(cell[i] for i in idxs)]
        out[joint] = out.get(joint, 0) + mass
    return out


def evaluate(dg: DiceyGame, s: GridStrategy, exact: bool | None = None) -> EvalResult:
    """Per-Devil-action expected payoff and value of a grid strategy.

    Exact rational arithmetic is used whenever every cut is rational, unless
    ``exact`` overrides it."""
    _require_valid(dg, s)
    if exact is None:
        exact = s.is_exact
    elif exact and not s.is_exact:
        raise StrategyError("exact evaluation needs rational cuts")
    masses = joint_masses(dg, s, exact)
    flat = dg.game.flat_payoffs
    per_action = {}
    for b, name in enumerate(dg.devil_actions):
        acc = Fraction(0) if exact else 0.0
        for joint in sorted(masses):
            acc += masses[joint] * int(flat[joint, b])
        per_action[name] = acc
    return EvalResult(per_action, min(per_action.values()), EXACT if exact else FLOATING)


def _piece_of(lam: Sequence[Number], r) -> int:
    """Left-open, right-closed pieces; the first is closed at 0. Zero-length pieces never win."""
    positive = [j for j, x in enumerate(lam) if x > 0]
    if r <= 0:
        return positive[0]
    cum = list(itertools.accumulate(lam))
    j = bisect_left(cum, r)
    if j >= len(lam):
        return positive[-1]
    return j


def play_roll(dg: DiceyGame, s: GridStrategy, roll: Mapping[str, float]) -> dict[str, str]:
    _require_valid(dg, s)
    cell = {}
    for d in dg.dice:
        if d not in roll:
            raise StrategyError(f"roll misses die {d!r}")
        r = roll[d]
        if not 0 <= r <= 1:
            raise StrategyError(f"roll {r} of die {d!r} outside [0,1]")
        cell[d] = _piece_of(s.cuts[d], r)
    return {p: s.action(p, cell) for p in dg.team_players}


def _vector_pieces(lam: Sequence[Number], rolls: np.ndarray) -> np.ndarray:
    lam = np.asarray([float(x) for x in lam])
    cum = np.cumsum(lam)
    cum[-1] = max(cum[-1], 1.0)
    idx = np.searchsorted(cum, rolls, side="left")
    positive = np.flatnonzero(lam > 0)
    idx = np.minimum(idx, positive[-1])
    idx[rolls <= 0] = positive[0]
    return idx


def _joint_indices(dg: DiceyGame, s: GridStrategy, rolls: np.ndarray) -> np.ndarray:
    pos = {d: i for i, d in enumerate(dg.dice)}
    pieces = {d: _vector_pieces(s.cuts[d], rolls[:, pos[d]]) for d in dg.dice}
    joint = np.zeros(rolls.shape[0], dtype=np.int64)
    for p, st in zip(dg.team_players, dg.game.joint_strides):
        t = s.tables[p]
        acts = dg.game.actions[p]
        shape = tuple(len(s.cuts[d]) for d in t.dice)
        lut = np.zeros(shape, dtype=np.int64)
        for c, a in t.cells.items():
            lut[c] = acts.index(a)
        if t.dice:
            joint += lut[tuple(pieces[d] for d in t.dice)] * st
        else:
            joint += int(lut[()]) * st
    return joint


def _mc_chunk(dg, s, flat, seed_seq, n):
    rng = np.random.default_rng(seed_seq)
    rolls = rng.random((n, len(dg.dice)))
    pay = flat[_joint_indices(dg, s, rolls)].astype(np.float64)
    return pay.sum(axis=0), (pay * pay).sum(axis=0)


def monte_carlo(
    dg: DiceyGame, s: GridStrategy, samples: int, seed: int = 0, jobs: int = 1
) -> McEstimate:
    """Seeded estimate of every per-action expectation.

    Samples are split into fixed-size chunks with spawned seeds, so the result
    does not depend on ``jobs``."""
    if samples < 1:
        raise StrategyError("samples must be >= 1")
    _require_valid(dg, s)
    flat = dg.game.flat_payoffs
    sizes = [MC_CHUNK] * (samples // MC_CHUNK)
    if samples % MC_CHUNK:
        sizes.append(samples % MC_CHUNK)
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(jobs) as ex:
            parts = list(ex.map(lambda a: _mc_chunk(dg, s, flat, *a), zip(seqs, sizes)))
    else:
        parts = [_mc_chunk(dg, s, flat, q, n) for q, n in zip(seqs, sizes)]
    total = np.zeros(flat.shape[1])
    total_sq = np.zeros(flat.shape[1])
    for a, b in parts:
        total += a
        total_sq += b
    out = {}
    for b, name in enumerate(dg.devil_actions):
        mean = total[b] / samples
        if samples > 1:
            var = max(total_sq[b] - samples * mean * mean, 0.0) / (samples - 1)
            se = float(np.sqrt(var / samples))
        else:
            se = 0.0
        out[name] = (float(mean), se, samples)
    return McEstimate(out, seed)


def refine_common_grid(s: GridStrategy, extra_cuts: Mapping[str, Sequence]) -> GridStrategy:
    """Split pieces at the given cumulative positions, replicating table entries."""
    new_cuts = {}
    origin = {}  # die -> list of old piece index per new piece
    for d, lam in s.cuts.items():
        positions = sorted(set(as_number(c) if not isinstance(c, float) else c
                               for c in extra_cuts.get(d, ())))
        for c in positions:
            if not 0 <= c <= 1:
                raise StrategyError(f"cut {c} of die {d!r} outside [0,1]")
        pieces, src = [], []
        lo = 0
        for j, x in enumerate(lam):
            hi = lo + x
            start = lo
            for c in positions:
                if start < c < hi:
                    pieces.append(c - start)
                    src.append(j)
                    start = c
            pieces.append(hi - start)
            src.append(j)
            lo = hi
        new_cuts[d] = tuple(pieces)
        origin[d] = src
    tables = {}
    for p, t in s.tables.items():
        cells = {}
        for idx in itertools.product(*(range(len(new_cuts[d])) for d in t.dice)):
            old = tuple(origin[d][i] for d, i in zip(t.dice, idx))
            cells[idx] = t.cells[old]
        tables[p] = PlayerTable(t.dice, cells)
    return GridStrategy(new_cuts, tables)


# --- documents -------------------------------------------------------------


def _cell_key(idx: tuple[int, ...]) -> str:
    return ",".join(str(i) for i in idx)


def _parse_key(key: str) -> tuple[int, ...]:
    if key == "":
        return ()
    try:
        return tuple(int(x) for x in key.split(","))
    except ValueError:
        raise GameSemanticError(f"bad cell key {key!r}") from None


def number_to_json(x):
    if isinstance(x, float):
        return x
    x = Fraction(x)
    return str(x)


def strategy_to_dict(dg: DiceyGame | None, s: GridStrategy) -> dict:
    doc = {
        "cuts": {d: [number_to_json(x) for x in lam] for d, lam in s.cuts.items()},
        "tables": {
            p: {_cell_key(c): a for c, a in sorted(t.cells.items())}
            for p, t in s.tables.items()
        },
    }
    extra = {
        p: list(t.dice)
        for p, t in s.tables.items()
        if dg is None or tuple(t.dice) != dg.accessible(p)
    }
    if extra:
        doc["table_dice"] = extra
    return doc


def strategy_from_dict(dg: DiceyGame, doc: Mapping) -> GridStrategy:
    if not isinstance(doc, dict) or "cuts" not in doc or "tables" not in doc:
        raise GameSemanticError("strategy document needs 'cuts' and 'tables'")
    cuts = {d: tuple(as_number(x) for x in lam) for d, lam in doc["cuts"].items()}
    table_dice = doc.get("table_dice", {})
    tables = {}
    for p, cells in doc["tables"].items():
        dice = tuple(table_dice.get(p, dg.accessible(p) if p in dg.team_players else ()))
        tables[p] = PlayerTable(dice, {_parse_key(k): a for k, a in cells.items()})
    return GridStrategy(cuts, tables)


def parse_strategy(dg: DiceyGame, text: str) -> GridStrategy:
    return strategy_from_dict(dg, _loads(text))


def serialize_strategy(dg: DiceyGame | None, s: GridStrategy) -> str:
    return json.dumps(strategy_to_dict(dg, s), sort_keys=True, indent=2) + "\n"


def eval_to_dict(r: EvalResult) -> dict:
    return {
        "per_action": {b: number_to_json(v) for b, v in r.per_action.items()},
        "value": number_to_json(r.value),
        "value_float": float(r.value),
        "arithmetic_mode": r.arithmetic_mode,
    }
