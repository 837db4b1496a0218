"""Slice-based reshaping of grid strategies into k-grid strategies without value loss.

Fixing the piece of one die gives a slice: a vector of conditional expectations,
one per Devil action. The strategy's expectation vector is the weighted mean of
its slices. A convex combination of at most k slices that dominates that mean
componentwise is found exactly (rational arithmetic), and the die is rebuilt
from those slices only.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .game import DiceyGame, GameError
from .strategy import GridStrategy, PlayerTable, _require_valid, joint_masses


class SliceError(GameError):
    pass


@dataclass(frozen=True)
class SliceProfile:
    die: str
    actions: tuple[str, ...]
    points: tuple[tuple[int, tuple[Fraction, ...], Fraction], ...]  # (piece, v_j, w_j)
    integral: tuple[Fraction, ...]


@dataclass(frozen=True)
class SliceSelection:
    chosen: tuple[tuple[int, Fraction], ...]  # (piece, convex weight)
    dominated_target: tuple[Fraction, ...]
    combined: tuple[Fraction, ...]
    residual: float = 0.0


def slice_profile(dg: DiceyGame, s: GridStrategy, die: str) -> SliceProfile:
    """Conditional expectation vector of every piece of ``die``.

    Conditioning on a piece leaves the other dice untouched, so zero-length
    pieces get a well-defined slice as well."""
    _require_valid(dg, s)
    if die not in dg.dice:
        raise SliceError(f"unknown die {die!r}")
    flat = dg.game.flat_payoffs
    B = len(dg.devil_actions)
    exact_cuts = {d: tuple(Fraction(x) for x in v) for d, v in s.cuts.items()}
    m = len(exact_cuts[die])
    points = []
    for j in range(m):
        onehot = tuple(Fraction(int(i == j)) for i in range(m))
        masses = joint_masses(dg, GridStrategy({**exact_cuts, die: onehot}, s.tables), True)
        v = tuple(
            sum((masses[J] * int(flat[J, b]) for J in sorted(masses)), Fraction(0))
            for b in range(B)
        )
        points.append((j, v, exact_cuts[die][j]))
    integral = tuple(sum((w * v[b] for _, v, w in points), Fraction(0)) for b in range(B))
    return SliceProfile(die, dg.devil_actions, tuple(points), integral)


# --- exact linear algebra --------------------------------------------------


def _rref(rows: list[list[Fraction]]):
    A = [r[:] for r in rows]
    pivots = []
    r = 0
    ncols = len(A[0]) if A else 0
    for c in range(ncols):
        p = next((i for i in range(r, len(A)) if A[i][c] != 0), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        inv = 1 / A[r][c]
        A[r] = [x * inv for x in A[r]]
        for i in range(len(A)):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == len(A):
            break
    return A, pivots


def _null_vector(rows: list[list[Fraction]]) -> list[Fraction] | None:
    """A nonzero kernel vector (first free column set to 1), or None."""
    ncols = len(rows[0])
    A, pivots = _rref(rows)
    free = [c for c in range(ncols) if c not in pivots]
    if not free:
        return None
    f = free[0]
    x = [Fraction(0)] * ncols
    x[f] = Fraction(1)
    for i, c in enumerate(pivots):
        x[c] = -A[i][f]
    return x


def _solve_square(rows: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    aug = [r + [b] for r, b in zip(rows, rhs)]
    A, pivots = _rref(aug)
    if len(pivots) != len(rows) or pivots[-1] == len(rows):
        raise SliceError("singular system in facet step")
    return [A[i][-1] for i in range(len(rows))]


def _ratio(weights: Sequence[Fraction], direction: Sequence[Fraction]):
    """Largest t with weights - t*direction >= 0, and the blocking index (lowest on ties)."""
    best, arg = None, None
    for i, (w, c) in enumerate(zip(weights, direction)):
        if c > 0:
            t = w / c
            if best is None or t < best:
                best, arg = t, i
    return best, arg


def caratheodory_select(profile: SliceProfile, k: int | None = None) -> SliceSelection:
    """At most k slices whose convex combination dominates the profile's integral.

    First remove affine dependencies among the weighted slices (Carathéodory),
    which leaves at most |A_Devil|+1 affinely independent points representing
    the integral exactly. If one point too many remains, slide the integral along
    the all-ones direction inside their simplex until one weight vanishes: the
    point reached lies on a facet and dominates the integral."""
    B = len(profile.integral)
    k = B if k is None else k
    if k < B:
        raise SliceError(f"k={k} is below the number of Devil actions {B}")
    support = [(j, v, w) for j, v, w in profile.points if w > 0]
    if not support:
        raise SliceError("profile has no mass")
    while len(support) > 1:
        cols = [list(v) + [Fraction(1)] for _, v, _ in support]
        rows = [[cols[i][r] for i in range(len(cols))] for r in range(B + 1)]
        c = _null_vector(rows)
        if c is None:
            break
        w = [x for _, _, x in support]
        t_pos, _ = _ratio(w, c)
        t_neg, _ = _ratio(w, [-x for x in c])
        if t_neg is not None and (t_pos is None or t_neg > t_pos):
            c, t = [-x for x in c], t_neg
        else:
            t = t_pos
        support = [(j, v, x - t * ci) for (j, v, x), ci in zip(support, c)]
        support = [p for p in support if p[2] > 0]
    if len(support) > k:
        # affinely independent, so exactly B+1 points spanning the whole space
        rows = [[v[b] for _, v, _ in support] for b in range(B)]
        rows.append([Fraction(1)] * len(support))
        d = _solve_square(rows, [Fraction(1)] * B + [Fraction(0)])
        w = [x for _, _, x in support]
        t, _ = _ratio(w, [-x for x in d])
        support = [(j, v, x + t * di) for (j, v, x), di in zip(support, d)]
        support = [p for p in support if p[2] > 0]
    total = sum(x for _, _, x in support)
    support = [(j, v, x / total) for j, v, x in sorted(support, key=lambda p: p[0])]
    combined = tuple(sum((x * v[b] for _, v, x in support), Fraction(0)) for b in range(B))
    if any(cb < tb for cb, tb in zip(combined, profile.integral)):
        raise SliceError("selection fails to dominate the integral")
    return SliceSelection(tuple((j, x) for j, _, x in support), profile.integral, combined)


def apply_phi(dg: DiceyGame, s: GridStrategy, die: str, sel: SliceSelection) -> GridStrategy:
    """Rebuild ``die`` from the selected slices; other dice keep their pieces."""
    m = len(s.cuts[die])
    if any(not 0 <= j < m for j, _ in sel.chosen) or not sel.chosen:
        raise SliceError("selection does not match the strategy")
    exact = s.is_exact
    weights = tuple(w if exact else float(w) for _, w in sel.chosen)
    renumber = {j: i for i, (j, _) in enumerate(sel.chosen)}
    tables = {}
    for p, t in s.tables.items():
        if die not in t.dice:
            tables[p] = t
            continue
        pos = t.dice.index(die)
        cells = {
            cell[:pos] + (renumber[cell[pos]],) + cell[pos + 1:]: a
            for cell, a in t.cells.items()
            if cell[pos] in renumber
        }
        tables[p] = PlayerTable(t.dice, cells)
    return GridStrategy({**s.cuts, die: weights}, tables)


def phi(dg: DiceyGame, s: GridStrategy, die: str, k: int | None = None) -> GridStrategy:
    k = k or len(dg.devil_actions)
    if len(s.cuts[die]) <= k:
        return s
    return apply_phi(dg, s, die, caratheodory_select(slice_profile(dg, s, die), k))


def normalize(dg: DiceyGame, s: GridStrategy) -> GridStrategy:
    """k-grid strategy (k = |A_Devil|) whose expectations dominate those of ``s``.

    Dice are processed in lexicographic order."""
    _require_valid(dg, s)
    for die in sorted(dg.dice):
        s = phi(dg, s, die)
    return s


def profile_to_dict(profile: SliceProfile) -> dict:
    return {
        "die": profile.die,
        "slices": [
            {"piece": j, "weight": str(w), "values": dict(zip(profile.actions, map(str, v)))}
            for j, v, w in profile.points
        ],
        "integral": dict(zip(profile.actions, map(str, profile.integral))),
    }
