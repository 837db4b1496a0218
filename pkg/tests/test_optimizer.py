import itertools
import random
from fractions import Fraction as F

import numpy as np
import pytest

from diceygames.families import BETA, gen_clique_mp
from diceygames.game import DiceStructure, DiceyGame, Game, PayoffRules, Rule, matching_pennies
from diceygames.optimizer import (
    SolverOptions,
    check_threshold,
    maximin_lambda,
    project_simplex,
    solve,
)
from diceygames.schemes import (
    BudgetExceeded,
    SchemeSpace,
    enumerate_schemes,
    expectations,
    gradients,
    scheme_of_strategy,
)
from diceygames.strategy import evaluate
from oracles import grid_search_value


def private_dice_game(n):
    players = [f"P{i}" for i in range(1, n + 1)]
    dice = tuple(f"R{i}" for i in range(1, n + 1))
    return DiceyGame(matching_pennies(players),
                     DiceStructure(dice, {d: {p} for d, p in zip(dice, players)}))


def table_game(payoffs, access, actions=("a", "b"), devil_actions=("u", "v")):
    """Two-player game from a dict (a1, a2, d) -> int."""
    rules = tuple(Rule({"P1": x, "P2": y, "Devil": d}, v) for (x, y, d), v in payoffs.items())
    g = Game(("P1", "P2"), {"P1": actions, "P2": actions, "Devil": devil_actions},
             PayoffRules(rules, 0))
    return DiceyGame(g, DiceStructure(tuple(access), access))


def random_table_game(rng, access):
    pay = {
        (x, y, d): rng.randint(-3, 3)
        for x, y, d in itertools.product("ab", "ab", ("u", "v"))
    }
    return table_game(pay, access), pay


# --- scheme space ------------------------------------------------------------


def test_scheme_counts(tri, one_player):
    assert SchemeSpace(tri, 2).count == 4096
    assert len(list(enumerate_schemes(tri, 2))) == 4096
    assert SchemeSpace(one_player, 2).count == 4


def test_budget_refusal_on_four_clique():
    dg, _ = gen_clique_mp(4)
    with pytest.raises(BudgetExceeded) as info:
        list(enumerate_schemes(dg, 2))
    assert info.value.count == 256**4


def test_enumeration_is_lexicographic_and_resumable(tri):
    space = SchemeSpace(tri, 2)
    full = list(itertools.islice(space.iter_schemes(), 40))
    tail = list(itertools.islice(space.iter_schemes(25), 15))
    assert full[25:] == tail
    assert [i for i, _ in full] == list(range(40))
    first = full[0][1]
    assert all(set(t) == {"H"} for t in first.values())


def test_decode_encode_round_trip(tri):
    space = SchemeSpace(tri, 2)
    idx = [0, 1, 17, 4095, 2024]
    decoded = space.decode(idx)
    for row, i in enumerate(idx):
        assert space.encode([d[row] for d in decoded]) == i
    _, named = next(space.iter_schemes(2024))
    assert [list(x[0]) for x in space.indexed(named)] == [list(d[4]) for d in decoded]


def test_gradients_match_finite_differences(tri):
    space = SchemeSpace(tri, 2)
    M = space.tensors(space.decode([1234]))[0].astype(float)
    rng = np.random.default_rng(0)
    lam = rng.dirichlet(np.ones(2), size=3)
    G = gradients(M, lam, space.cell_index)
    h = 1e-6
    for d in range(3):
        for j in range(2):
            up = lam.copy()
            up[d, j] += h
            fd = (expectations(M, up, space.cell_index) - expectations(M, lam, space.cell_index)) / h
            assert np.allclose(fd, G[:, d, j], atol=1e-5)


def test_project_simplex():
    v = np.array([[0.5, 0.9], [-1.0, 3.0], [0.2, 0.8]])
    p = project_simplex(v)
    assert np.allclose(p.sum(axis=1), 1)
    assert (p >= 0).all()
    assert np.allclose(p[1], [0, 1])
    assert np.allclose(p[2], [0.2, 0.8])
    assert np.allclose(p[0], [0.3, 0.7])


def test_scheme_of_strategy_pads(tri, thirds):
    scheme, lam = scheme_of_strategy(tri, thirds, 3)
    assert lam.shape == (3, 3)
    assert np.allclose(lam[:, 2], 0)
    assert all(len(t) == 9 for t in scheme.values())


# --- maximin over one scheme -------------------------------------------------


def test_maximin_one_player(one_player):
    res = maximin_lambda(one_player, {"A": ("H", "T")})
    assert abs(res.value - 0.5) < 1e-6
    assert np.allclose(res.lam, [[0.5, 0.5]], atol=1e-6)
    assert sorted(res.active_actions) == ["H", "T"]


def test_maximin_triangular_scheme(tri, optimum):
    scheme, _ = scheme_of_strategy(tri, optimum, 2)
    res = maximin_lambda(tri, scheme)
    assert abs(res.value - BETA) < 1e-6
    assert abs(res.value - 0.2780741) < 1e-4
    assert np.allclose(res.lam, [[0.34730, 0.65270]] * 3, atol=1e-4)


def test_maximin_constant_scheme(tri):
    scheme = {p: ("H",) * 4 for p in tri.team_players}
    res = maximin_lambda(tri, scheme)
    assert res.value == 0.0
    assert res.iterations <= 1


# --- solve -------------------------------------------------------------------


@pytest.mark.parametrize("n, value", [(1, 0.5), (2, 0.25), (3, 0.125)])
def test_private_dice_baselines(n, value):
    res = solve(private_dice_game(n))
    assert abs(res.value - value) < 1e-6


def test_triangular_exhaustive_and_soundness(tri):
    res = solve(tri, "exhaustive")
    assert abs(res.value - BETA) < 1e-9
    assert res.stats["schemes_total"] == 4096
    assert abs(float(evaluate(tri, res.strategy).value) - res.value) < 1e-9


def test_hybrid_uses_conjecture_seed(tri):
    res = solve(tri, "hybrid", SolverOptions(seed=3, restarts=2, climb_rounds=3))
    assert abs(res.value - BETA) < 1e-6
    assert res.mode == "hybrid"


def test_hybrid_is_deterministic():
    rng = random.Random(1)
    dg, _ = random_table_game(rng, {"D1": {"P1", "P2"}, "D2": {"P2"}})
    opts = SolverOptions(seed=11, restarts=3, climb_rounds=4)
    a, b = solve(dg, "hybrid", opts), solve(dg, "hybrid", opts)
    assert a.value == b.value and a.strategy == b.strategy


def test_exhaustive_is_deterministic(tri):
    a = solve(tri, "exhaustive", SolverOptions(seed=4))
    b = solve(tri, "exhaustive", SolverOptions(seed=4))
    assert a.scheme_index == b.scheme_index and a.strategy == b.strategy


@pytest.mark.parametrize("seed", range(6))
def test_exhaustive_matches_grid_oracle(seed):
    rng = random.Random(seed)
    access = [{"D1": {"P1"}, "D2": {"P2"}}, {"D1": {"P1", "P2"}, "D2": {"P2"}},
              {"D1": {"P1", "P2"}}][seed % 3]
    dg, pay = random_table_game(rng, access)
    res = solve(dg, "exhaustive")
    oracle = grid_search_value(
        ("P1", "P2"), {"P1": "ab", "P2": "ab"}, access, ("u", "v"),
        lambda prof, d: pay[(prof["P1"], prof["P2"], d)], 2, 200,
    )
    assert abs(res.value - oracle) <= 5e-3
    assert res.value >= oracle - 1e-9


def test_devil_action_monotonicity():
    base = matching_pennies(["A", "B"], actions=("H", "T", "X"))
    structure = DiceStructure(("D",), {"D": {"A", "B"}})
    full = solve(DiceyGame(base, structure)).value
    acts = dict(base.actions)
    acts["Devil"] = ("H", "T")
    rules = tuple(r for r in base.payoff.rules if r.when["Devil"] != "X")
    fewer = solve(DiceyGame(Game(("A", "B"), acts, PayoffRules(rules, 0)), structure)).value
    assert fewer >= full - 1e-9


def test_access_monotonicity():
    rng = random.Random(7)
    small = {"D1": {"P1"}, "D2": {"P2"}}
    dg, pay = random_table_game(rng, small)
    bigger = dg.with_structure(DiceStructure(("D1", "D2"), {"D1": {"P1", "P2"}, "D2": {"P2"}}))
    assert solve(bigger).value >= solve(dg).value - 1e-9


def test_affine_equivariance():
    rng = random.Random(3)
    access = {"D1": {"P1", "P2"}, "D2": {"P2"}}
    dg, pay = random_table_game(rng, access)
    a, c = 3, -2
    # every profile gets an explicit rule, so the default never applies
    scaled = table_game({key: a * v + c for key, v in pay.items()}, access)
    v1, v2 = solve(dg).value, solve(scaled).value
    assert abs(v2 - (a * v1 + c)) < 1e-6


def test_threshold_examples(tri):
    yes = check_threshold(tri, F(1, 4))
    assert yes.verdict == "YES"
    assert evaluate(tri, yes.best.strategy).value >= 0.25
    no = check_threshold(tri, 0.279)
    assert no.verdict == "NO_WITHIN_SEARCH"
    assert no.best.value >= 0.278
    assert check_threshold(tri, 2).verdict == "NO_WITHIN_SEARCH"


def test_budget_refusal_in_solve():
    dg, _ = gen_clique_mp(4)
    with pytest.raises(BudgetExceeded):
        solve(dg, "exhaustive")
