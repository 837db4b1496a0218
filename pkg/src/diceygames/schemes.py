"""Strategy schemes: per-player action tables over k pieces per accessible die.

A scheme fixes the discrete part of a k-grid strategy; the piece lengths are
left free. Schemes are numbered in mixed radix (first player, first cell most
significant), which fixes the enumeration order used everywhere else.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Mapping, Sequence

import numpy as np

from .game import DiceyGame, GameError
from .strategy import GridStrategy, PlayerTable

DEFAULT_BUDGET = 1_000_000

Scheme = Mapping[str, tuple[str, ...]]


class BudgetExceeded(GameError):
    def __init__(self, count: int, budget: int):
        super().__init__(f"{count} schemes exceed the budget of {budget}")
        self.count = count
        self.budget = budget


@dataclass(frozen=True, eq=False)
class SchemeSpace:
    dg: DiceyGame
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise GameError("k must be >= 1")

    @property
    def players(self) -> tuple[str, ...]:
        return self.dg.team_players

    @property
    def dice(self) -> tuple[str, ...]:
        return self.dg.dice

    @cached_property
    def table_sizes(self) -> tuple[int, ...]:
        return tuple(self.k ** len(self.dg.accessible(p)) for p in self.players)

    @cached_property
    def radices(self) -> tuple[int, ...]:
        return tuple(len(self.dg.game.actions[p]) for p in self.players)

    @cached_property
    def count(self) -> int:
        return math.prod(r**t for r, t in zip(self.radices, self.table_sizes))

    @property
    def n_cells(self) -> int:
        return self.k ** len(self.dice)

    @cached_property
    def cell_index(self) -> np.ndarray:
        """(C, n) piece index of every full cell, row-major over the game's dice."""
        n = len(self.dice)
        if n == 0:
            return np.zeros((1, 0), dtype=np.int64)
        grid = np.indices((self.k,) * n).reshape(n, -1).T
        return np.ascontiguousarray(grid, dtype=np.int64)

    @cached_property
    def projections(self) -> tuple[np.ndarray, ...]:
        """Per player, the local table cell of every full cell."""
        pos = {d: i for i, d in enumerate(self.dice)}
        out = []
        for p in self.players:
            acc = self.dg.accessible(p)
            local = np.zeros(self.n_cells, dtype=np.int64)
            for d in acc:
                local = local * self.k + self.cell_index[:, pos[d]]
            out.append(local)
        return tuple(out)

    def check_budget(self, budget: int | None, force: bool = False) -> None:
        if budget is not None and not force and self.count > budget:
            raise BudgetExceeded(self.count, budget)

    def decode(self, indices: Sequence[int]) -> list[np.ndarray]:
        """Scheme indices -> per-player (S, table_size) action-index arrays."""
        rem = np.asarray(indices, dtype=object if self.count >= 2**62 else np.int64)
        out = []
        for r, t in zip(reversed(self.radices), reversed(self.table_sizes)):
            digits = np.empty((len(rem), t), dtype=np.int64)
            for c in range(t - 1, -1, -1):
                digits[:, c] = (rem % r).astype(np.int64)
                rem = rem // r
            out.append(digits)
        return out[::-1]

    def encode(self, tables: Sequence[Sequence[int]]) -> int:
        idx = 0
        for r, t, tab in zip(self.radices, self.table_sizes, tables):
            for a in tab:
                idx = idx * r + int(a)
        return idx

    def tensors(self, tables: Sequence[np.ndarray]) -> np.ndarray:
        """Payoff tensors M[s, b, c] = payoff of cell c's team profile against b."""
        S = tables[0].shape[0] if tables else 1
        joint = np.zeros((S, self.n_cells), dtype=np.int64)
        for tab, proj, st in zip(tables, self.projections, self.dg.game.joint_strides):
            joint += tab[:, proj] * st
        flat = self.dg.game.flat_payoffs
        return np.ascontiguousarray(flat[joint].transpose(0, 2, 1))

    def iter_schemes(self, start: int = 0) -> Iterator[tuple[int, dict[str, tuple[str, ...]]]]:
        """Lexicographic scheme stream from cursor ``start``."""
        tables = itertools.product(
            *(itertools.product(range(r), repeat=t) for r, t in zip(self.radices, self.table_sizes))
        )
        for i, tabs in enumerate(itertools.islice(tables, start, None), start):
            yield i, self.named(tabs)

    def named(self, tables: Sequence[Sequence[int]]) -> dict[str, tuple[str, ...]]:
        return {
            p: tuple(self.dg.game.actions[p][int(a)] for a in tab)
            for p, tab in zip(self.players, tables)
        }

    def indexed(self, scheme: Scheme) -> list[np.ndarray]:
        out = []
        for p, t in zip(self.players, self.table_sizes):
            acts = self.dg.game.actions[p]
            tab = scheme[p]
            if len(tab) != t:
                raise GameError(f"scheme table of {p!r} has {len(tab)} cells, expected {t}")
            out.append(np.array([[acts.index(a) for a in tab]], dtype=np.int64))
        return out

    def strategy(self, tables: Sequence[Sequence[int]], lam: np.ndarray) -> GridStrategy:
        """GridStrategy with float cuts from a scheme and an (n, k) weight array."""
        cuts = {d: tuple(float(x) for x in lam[i]) for i, d in enumerate(self.dice)}
        out = {}
        for p, tab in zip(self.players, tables):
            acc = self.dg.accessible(p)
            acts = self.dg.game.actions[p]
            cells = {}
            for loc, idx in enumerate(itertools.product(range(self.k), repeat=len(acc))):
                cells[idx] = acts[int(tab[loc])]
            out[p] = PlayerTable(acc, cells)
        return GridStrategy(cuts, out)


def enumerate_schemes(
    dg: DiceyGame, k: int | None = None, budget: int | None = DEFAULT_BUDGET,
    start: int = 0, force: bool = False,
) -> Iterator[tuple[int, dict[str, tuple[str, ...]]]]:
    """Stream (cursor, scheme) pairs; refuses up front when the space exceeds ``budget``."""
    space = SchemeSpace(dg, k or len(dg.devil_actions))
    space.check_budget(budget, force)
    return space.iter_schemes(start)


def scheme_of_strategy(dg: DiceyGame, s: GridStrategy, k: int | None = None):
    """Read a grid strategy as (scheme, lambda) at k pieces per die.

    Dice with fewer than k pieces are padded with zero-length pieces that copy
    the last piece's behaviour; tables that ignore an accessible die are expanded."""
    k = k or max(s.grid_size, 1)
    if s.grid_size > k:
        raise GameError(f"strategy has {s.grid_size} pieces on some die, more than k={k}")
    lam = np.zeros((len(dg.dice), k))
    for i, d in enumerate(dg.dice):
        v = [float(x) for x in s.cuts[d]]
        lam[i, : len(v)] = v
    scheme = {}
    for p in dg.team_players:
        acc = dg.accessible(p)
        t = s.tables[p]
        tab = []
        for idx in itertools.product(range(k), repeat=len(acc)):
            cell = {d: min(j, len(s.cuts[d]) - 1) for d, j in zip(acc, idx)}
            tab.append(t.cells[tuple(cell[d] for d in t.dice)])
        scheme[p] = tuple(tab)
    return scheme, lam


# --- multilinear evaluation ------------------------------------------------


def weights(lam: np.ndarray, cell_index: np.ndarray) -> np.ndarray:
    """Cell masses prod_d lam[..., d, j_d] for lam of shape (..., n, k) -> (..., C)."""
    n = lam.shape[-2]
    out = np.ones(lam.shape[:-2] + (cell_index.shape[0],))
    for d in range(n):
        out = out * lam[..., d, :][..., cell_index[:, d]]
    return out


def expectations(M: np.ndarray, lam: np.ndarray, cell_index: np.ndarray) -> np.ndarray:
    """E_b(lam) for one tensor M (B, C) and lam (n, k) -> (B,)."""
    return M @ weights(lam, cell_index)


def gradients(M: np.ndarray, lam: np.ndarray, cell_index: np.ndarray) -> np.ndarray:
    """dE_b / dlam[d, j] for one tensor, shape (B, n, k)."""
    n, k = lam.shape
    B = M.shape[0]
    factors = [lam[d][cell_index[:, d]] for d in range(n)]
    out = np.zeros((B, n, k))
    for d in range(n):
        w = np.ones(cell_index.shape[0])
        for e in range(n):
            if e != d:
                w = w * factors[e]
        contrib = M * w  # (B, C)
        for j in range(k):
            out[:, d, j] = contrib[:, cell_index[:, d] == j].sum(axis=1)
    return out
