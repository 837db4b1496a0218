"""Property-based checks over small random games and grid strategies."""

import itertools
from fractions import Fraction as F

from hypothesis import given, settings
from hypothesis import strategies as st

from diceygames.families import triangular_game
from diceygames.game import DiceStructure, DiceyGame, Game, PayoffRules, Rule, parse_game
from diceygames.game import serialize_game
from diceygames.strategy import (
    GridStrategy,
    evaluate,
    joint_masses,
    parse_strategy,
    refine_common_grid,
    serialize_strategy,
)
from oracles import brute_force_expectations

TEAM = ("P1", "P2")
ACTS = ("a", "b")
DEVIL = ("u", "v")
PROFILES = list(itertools.product(ACTS, ACTS, DEVIL))
ACCESS_CHOICES = [frozenset(), frozenset({"P1"}), frozenset({"P2"}), frozenset(TEAM)]

SETTINGS = settings(max_examples=40, deadline=None)


def build_game(values, access):
    rules = tuple(Rule({"P1": x, "P2": y, "Devil": d}, v) for (x, y, d), v in zip(PROFILES, values))
    game = Game(TEAM, {"P1": ACTS, "P2": ACTS, "Devil": DEVIL}, PayoffRules(rules, 0))
    dice = tuple(sorted(access))
    return DiceyGame(game, DiceStructure(dice, {d: access[d] for d in dice}))


def pieces(k):
    return st.lists(st.integers(0, 5), min_size=k, max_size=k).filter(any).map(
        lambda xs: tuple(F(x, sum(xs)) for x in xs))


@st.composite
def game_and_strategy(draw):
    values = draw(st.lists(st.integers(-3, 3), min_size=len(PROFILES), max_size=len(PROFILES)))
    n_dice = draw(st.integers(0, 2))
    access = {f"D{i}": draw(st.sampled_from(ACCESS_CHOICES)) for i in range(1, n_dice + 1)}
    dg = build_game(values, access)
    cuts = {d: draw(pieces(draw(st.integers(1, 3)))) for d in dg.dice}
    choice = draw(st.lists(st.sampled_from(ACTS), min_size=64, max_size=64))

    def rule(p, cell):
        key = (TEAM.index(p),) + tuple(cell.get(d, 0) for d in ("D1", "D2"))
        return choice[key[0] * 9 + key[1] * 3 + key[2]]

    return dg, GridStrategy.from_function(dg, cuts, rule), values, rule


@SETTINGS
@given(game_and_strategy())
def test_evaluation_matches_brute_force(gs):
    dg, s, values, rule = gs
    table = dict(zip(PROFILES, values))
    access = {d: dg.structure.access[d] for d in dg.dice}
    expected = brute_force_expectations(TEAM, access, DEVIL,
                                        lambda prof, b: table[(prof["P1"], prof["P2"], b)],
                                        dict(s.cuts), rule)
    assert evaluate(dg, s).per_action == expected


@SETTINGS
@given(game_and_strategy())
def test_documents_round_trip(gs):
    dg, s, _, _ = gs
    text = serialize_game(dg)
    again = parse_game(text)
    assert again == dg and serialize_game(again) == text
    doc = serialize_strategy(dg, s)
    assert parse_strategy(dg, doc) == s and serialize_strategy(dg, parse_strategy(dg, doc)) == doc


@SETTINGS
@given(game_and_strategy(), st.integers(1, 4), st.integers(-3, 3))
def test_affine_equivariance(gs, a, c):
    dg, s, values, _ = gs
    access = {d: dg.structure.access[d] for d in dg.dice}
    scaled = build_game([a * v + c for v in values], access)
    before, after = evaluate(dg, s), evaluate(scaled, s)
    assert all(after.per_action[b] == a * before.per_action[b] + c for b in DEVIL)
    assert after.value == a * before.value + c


@SETTINGS
@given(game_and_strategy(), st.lists(st.fractions(0, 1), max_size=3))
def test_refinement_invariance(gs, positions):
    dg, s, _, _ = gs
    r = refine_common_grid(s, {d: positions for d in dg.dice})
    assert evaluate(dg, r).per_action == evaluate(dg, s).per_action


@SETTINGS
@given(game_and_strategy())
def test_mass_conservation(gs):
    dg, s, _, _ = gs
    masses = joint_masses(dg, s, True)
    assert sum(masses.values()) == 1
    assert all(m >= 0 for m in masses.values())


@SETTINGS
@given(st.permutations(["P1", "P2", "P3"]), st.permutations(["D_P1_P2", "D_P1_P3", "D_P2_P3"]),
       st.lists(st.sampled_from("HT"), min_size=12, max_size=12), pieces(2))
def test_permutation_invariance(players, dice, choice, lam):
    tri = triangular_game()
    g = tri.game
    shuffled = DiceyGame(
        Game(tuple(players), g.actions, g.payoff, g.devil_id),
        DiceStructure(tuple(dice), {d: tri.structure.access[d] for d in dice}),
    )
    s = GridStrategy.from_function(
        tri, {d: lam for d in tri.dice},
        lambda p, cell: choice[int(p[1]) * 4 - 4 + 2 * list(cell.values())[0] + list(cell.values())[1]],
    )
    assert evaluate(shuffled, s).per_action == evaluate(tri, s).per_action
