import random
from fractions import Fraction as F

import pytest

from conftest import sigma_bar_0
from diceygames.game import DiceStructure, DiceyGame, Game, PayoffRules, Rule
from diceygames.slicer import (
    SliceError,
    SliceProfile,
    apply_phi,
    caratheodory_select,
    normalize,
    phi,
    profile_to_dict,
    slice_profile,
)
from diceygames.strategy import GridStrategy, evaluate, validate_strategy


def dominates(a, b):
    return all(a[x] >= b[x] for x in b)


def random_cuts(rng, m):
    raw = [rng.randint(0, 6) for _ in range(m)]
    if not any(raw):
        raw[0] = 1
    return tuple(F(r, sum(raw)) for r in raw)


def test_sigma_bar_0_slices(tri):
    s = sigma_bar_0(tri)
    prof = slice_profile(tri, s, "D_P1_P2")
    vectors = [v for _, v, _ in prof.points]
    assert vectors == [(F(4, 9), F(1, 9)), (F(0), F(5, 9)), (F(4, 9), F(1, 9))]
    assert [w for _, _, w in prof.points] == [F(1, 3)] * 3
    assert prof.integral == (F(8, 27), F(7, 27))


def test_sigma_bar_0_selection(tri):
    sel = caratheodory_select(slice_profile(tri, sigma_bar_0(tri), "D_P1_P2"))
    assert sel.chosen == ((0, F(2, 3)), (1, F(1, 3)))
    assert all(c >= t for c, t in zip(sel.combined, sel.dominated_target))


def test_normalize_sigma_bar_0(tri):
    s = sigma_bar_0(tri)
    out = normalize(tri, s)
    assert out.grid_size == 2
    assert validate_strategy(tri, out).ok
    ev = evaluate(tri, out)
    assert ev.value >= F(7, 27)
    assert dominates(ev.per_action, evaluate(tri, s).per_action)


def test_phi_leaves_small_dice_alone(tri, thirds):
    assert phi(tri, thirds, "D_P1_P2") is thirds


def test_integral_matches_evaluation(tri):
    s = sigma_bar_0(tri)
    for d in tri.dice:
        prof = slice_profile(tri, s, d)
        assert dict(zip(prof.actions, prof.integral)) == evaluate(tri, s).per_action


@pytest.mark.parametrize("seed", range(8))
def test_random_four_grid_normalizes_without_loss(tri, seed):
    rng = random.Random(seed)
    cuts = {d: random_cuts(rng, 4) for d in tri.dice}
    table = {}

    def rule(p, c):
        key = (p, tuple(sorted(c.items())))
        return table.setdefault(key, rng.choice("HT"))

    s = GridStrategy.from_function(tri, cuts, rule)
    out = normalize(tri, s)
    assert out.grid_size <= 2
    assert validate_strategy(tri, out).ok
    assert dominates(evaluate(tri, out).per_action, evaluate(tri, s).per_action)


def test_three_devil_actions_keep_three_pieces():
    acts = {"A": ("x", "y", "z"), "Devil": ("x", "y", "z")}
    rules = tuple(Rule({"A": a, "Devil": a}, 1) for a in "xyz")
    dg = DiceyGame(Game(("A",), acts, PayoffRules(rules, 0)), DiceStructure(("D",), {"D": {"A"}}))
    cuts = {"D": (F(1, 4),) * 4}
    s = GridStrategy.from_function(dg, cuts, lambda p, c: "xyzx"[c["D"]])
    out = normalize(dg, s)
    assert len(out.cuts["D"]) <= 3
    assert evaluate(dg, out).value >= evaluate(dg, s).value


def test_zero_length_pieces_are_dropped(tri):
    cuts = {d: (F(1, 2), F(0), F(1, 2)) for d in tri.dice}
    s = GridStrategy.from_function(tri, cuts, lambda p, c: "H" if sum(c.values()) % 2 else "T")
    sel = caratheodory_select(slice_profile(tri, s, "D_P1_P2"))
    assert all(j != 1 for j, _ in sel.chosen)


def test_errors(tri, thirds):
    with pytest.raises(SliceError):
        slice_profile(tri, thirds, "nope")
    prof = slice_profile(tri, thirds, "D_P1_P2")
    with pytest.raises(SliceError):
        caratheodory_select(prof, k=1)
    empty = SliceProfile("D", ("H", "T"), ((0, (F(0), F(0)), F(0)),), (F(0), F(0)))
    with pytest.raises(SliceError):
        caratheodory_select(empty)
    bad = caratheodory_select(prof)
    bad = type(bad)(((7, F(1)),), bad.dominated_target, bad.combined)
    with pytest.raises(SliceError):
        apply_phi(tri, thirds, "D_P1_P2", bad)


def test_profile_dict(tri):
    d = profile_to_dict(slice_profile(tri, sigma_bar_0(tri), "D_P1_P2"))
    assert d["integral"] == {"H": "8/27", "T": "7/27"}
    assert d["slices"][1]["values"] == {"H": "0", "T": "5/9"}
