"""Dice allocation: enumerate the structures a dice pack allows and keep the best one.

Each die gets exactly min(acc, |team|) players. A player may always ignore a die,
so a larger access set never hurts and nothing is lost by saturating. Dice of
equal accessibility are interchangeable, so structures are enumerated as
multisets of access sets per accessibility class.
"""

from __future__ import annotations

import itertools
import logging
from math import comb
from dataclasses import dataclass, field
from typing import Iterator

from .game import DicePack, DiceStructure, DiceyGame, Game, GameError
from .optimizer import EPS_VAL, SchemeSearchResult, SolverOptions, solve
from .schemes import BudgetExceeded

log = logging.getLogger(__name__)


class AllocationBudgetExceeded(BudgetExceeded):
    def __init__(self, err: BudgetExceeded, structure: DiceStructure):
        super().__init__(err.count, err.budget)
        self.structure = structure
        self.args = (f"{err} for structure {canonical_form(structure)}",)


@dataclass
class AllocationResult:
    best_structure: DiceStructure
    value: float
    structures_examined: int
    best: SchemeSearchResult | None = None
    per_structure_log: list = field(default_factory=list)  # (canonical form, value)


def canonical_form(structure: DiceStructure) -> tuple[tuple[str, ...], ...]:
    return tuple(tuple(sorted(structure.access[d])) for d in structure.dice)


def _acc_groups(pack: DicePack) -> list[tuple[int, list[str]]]:
    groups: dict[int, list[str]] = {}
    for d in pack.dice:
        groups.setdefault(pack.acc[d], []).append(d)
    return [(a, sorted(ds)) for a, ds in sorted(groups.items())]


def count_structures(game: Game, pack: DicePack) -> int:
    """Number of canonical structures: a multiset count per accessibility class."""
    n = len(game.team_players)
    total = 1
    for a, ds in _acc_groups(pack):
        subsets = comb(n, min(a, n))
        total *= comb(subsets + len(ds) - 1, len(ds))
    return total


def individual_die(player: str) -> str:
    return f"R_{player}"


def enumerate_structures(
    game: Game, pack: DicePack, individual_dice: bool = False
) -> Iterator[DiceStructure]:
    """Canonical saturated structures matching ``pack``, in a fixed order.

    Within an accessibility class the sorted dice receive a nondecreasing
    sequence of access sets, which is the canonical representative. With
    ``individual_dice`` every player also keeps a private die outside the pack."""
    players = sorted(game.team_players)
    groups = _acc_groups(pack)
    per_group = [
        itertools.combinations_with_replacement(
            list(itertools.combinations(players, min(a, len(players)))), len(ds)
        )
        for a, ds in groups
    ]
    extra = {individual_die(p): frozenset([p]) for p in players} if individual_dice else {}
    clash = set(extra) & set(pack.dice)
    if clash:
        raise GameError(f"pack die names clash with individual dice: {sorted(clash)}")
    for choice in itertools.product(*per_group):
        access = dict(extra)
        for (_, ds), sets in zip(groups, choice):
            for d, s in zip(ds, sets):
                access[d] = frozenset(s)
        yield DiceStructure(pack.dice + tuple(extra), access)


def allocate_solve(
    game: Game, pack: DicePack, mode: str = "auto", opts: SolverOptions | None = None,
    individual_dice: bool = False,
) -> AllocationResult:
    """Solve every canonical structure; the first one reaching the best value wins."""
    opts = opts or SolverOptions()
    best = None
    n = 0
    history = []
    for structure in enumerate_structures(game, pack, individual_dice):
        n += 1
        dg = DiceyGame(game, structure)
        try:
            res = solve(dg, mode, opts)
        except BudgetExceeded as e:
            raise AllocationBudgetExceeded(e, structure) from None
        history.append((canonical_form(structure), res.value))
        log.info("structure %s: %.9f", canonical_form(structure), res.value)
        if best is None or res.value > best[1].value + EPS_VAL:
            best = (structure, res)
    if best is None:
        raise GameError("no structure matches the pack")
    return AllocationResult(best[0], best[1].value, n, best[1], history)
