"""Matching-pennies families: clique games, the triangular constants, conjecture strategies."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

from .game import DEFAULT_DEVIL, DicePack, DiceStructure, DiceyGame, GameError, matching_pennies
from .strategy import GridStrategy


def bisect_root(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    flo = f(lo)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def _refine_alpha() -> float:
    a = bisect_root(lambda x: x**3 - 3 * x + 1, 0.0, 1.0)
    # one Newton step lands on the double-precision root
    return a - (a**3 - 3 * a + 1) / (3 * a * a - 3)


# threshold of the optimal triangular strategy: the root of X^3 - 3X + 1 in [0, 1]
ALPHA = _refine_alpha()
# value of triangular matching pennies; equals (1 - ALPHA)**3 as well
BETA = 3 * ALPHA**2 - 2 * ALPHA**3


def player_names(n: int) -> list[str]:
    width = len(str(n))
    return [f"P{i:0{width}d}" for i in range(1, n + 1)]


def pair_die(a: str, b: str) -> str:
    a, b = sorted((a, b))
    return f"D_{a}_{b}"


def gen_clique_mp(n: int, devil: str = DEFAULT_DEVIL) -> tuple[DiceyGame, DicePack]:
    """n-player matching pennies where every pair of players shares one die."""
    if n < 2:
        raise GameError("clique matching pennies needs n >= 2")
    players = player_names(n)
    game = matching_pennies(players, devil=devil)
    dice = [pair_die(a, b) for a, b in combinations(players, 2)]
    access = {pair_die(a, b): {a, b} for a, b in combinations(players, 2)}
    dg = DiceyGame(game, DiceStructure(tuple(dice), access))
    pack = DicePack(tuple(dice), {d: 2 for d in dice})
    return dg, pack


def triangular_game() -> DiceyGame:
    return gen_clique_mp(3)[0]


def detect_clique_mp(dg: DiceyGame) -> int | None:
    """Team size if ``dg`` is clique matching pennies up to naming, else None."""
    g = dg.game
    players = g.team_players
    n = len(players)
    if n < 2 or len(g.devil_actions) != 2:
        return None
    if any(g.actions[p] != g.devil_actions for p in players):
        return None
    pairs = sorted(tuple(sorted(dg.structure.access[d])) for d in dg.dice)
    if pairs != sorted(tuple(sorted(c)) for c in combinations(players, 2)):
        return None
    ref = matching_pennies(players, g.devil_actions, g.devil_id)
    if not (g.payoff_table == ref.payoff_table).all():
        return None
    return n


def build_conjecture_strategy(n: int, dg: DiceyGame | None = None) -> GridStrategy:
    """Pairs match through their shared die at 1/2; for odd n the first three players
    run the triangular strategy at ALPHA. Unused dice get a single piece."""
    if dg is None:
        dg = gen_clique_mp(n)[0]
    players = dg.team_players
    if len(players) != n:
        raise GameError("team size does not match n")
    heads, tails = dg.devil_actions
    die_of = {}
    for d in dg.dice:
        a, b = sorted(dg.structure.access[d])
        die_of[(a, b)] = d
    cuts = {d: (Fraction(1),) for d in dg.dice}
    role = {}  # player -> dice that must all land in the upper piece for Heads
    rest = list(players)
    if n % 2:
        tri, rest = rest[:3], rest[3:]
        for a, b in combinations(tri, 2):
            cuts[die_of[tuple(sorted((a, b)))]] = (ALPHA, 1 - ALPHA)
        for p in tri:
            role[p] = [die_of[tuple(sorted((p, q)))] for q in tri if q != p]
    for a, b in zip(rest[::2], rest[1::2]):
        d = die_of[tuple(sorted((a, b)))]
        cuts[d] = (Fraction(1, 2), Fraction(1, 2))
        role[a] = role[b] = [d]

    def rule(p, cell):
        return heads if all(cell[d] == 1 for d in role[p]) else tails

    return GridStrategy.from_function(dg, cuts, rule)


def conjectured_value(n: int):
    """(1/2)^(n/2) for even n (exact), (1/2)^((n-3)/2) * BETA for odd n."""
    if n % 2 == 0:
        return Fraction(1, 2 ** (n // 2))
    return BETA / 2 ** ((n - 3) // 2)
