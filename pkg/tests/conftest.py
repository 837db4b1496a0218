import sys
from fractions import Fraction as F
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from diceygames.families import ALPHA, build_conjecture_strategy, triangular_game  # noqa: E402
from diceygames.game import DiceStructure, DiceyGame, matching_pennies  # noqa: E402
from diceygames.strategy import GridStrategy  # noqa: E402


@pytest.fixture
def tri():
    return triangular_game()


@pytest.fixture
def one_player():
    return DiceyGame(matching_pennies(["A"]), DiceStructure(("D",), {"D": {"A"}}))


def thirds_strategy(dg):
    """Cut at 1/3 on every die; Heads iff both accessible dice land in the upper piece."""
    cuts = {d: (F(1, 3), F(2, 3)) for d in dg.dice}
    return GridStrategy.from_function(
        dg, cuts, lambda p, c: "H" if all(v == 1 for v in c.values()) else "T"
    )


def sigma_bar_0(dg):
    """Three equal pieces per die; Heads iff no accessible die lands in the middle piece."""
    cuts = {d: (F(1, 3),) * 3 for d in dg.dice}
    return GridStrategy.from_function(
        dg, cuts, lambda p, c: "H" if all(v != 1 for v in c.values()) else "T"
    )


@pytest.fixture
def thirds(tri):
    return thirds_strategy(tri)


@pytest.fixture
def optimum(tri):
    return build_conjecture_strategy(3, tri)


@pytest.fixture
def alpha():
    return ALPHA
