"""Maximin search over k-grid strategies.

For a fixed scheme the team's payoff against each Devil action is multilinear
in the piece lengths, so the scheme's value is ``max_lam min_b E_b(lam)`` over a
product of simplices. That inner problem is attacked by multi-start projected
subgradient ascent (batched over schemes and starts), then the most promising
schemes are polished on the epigraph form with SLSQP.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .game import DiceyGame
from .schemes import (
    DEFAULT_BUDGET,
    BudgetExceeded,
    Scheme,
    SchemeSpace,
    expectations,
    gradients,
    weights,
)
from .strategy import GridStrategy, evaluate

log = logging.getLogger(__name__)

EPS_VAL = 1e-9
EPS_OPT = 1e-6
EPS_ACT = 1e-6

INITIAL_STEP = 0.25
MAX_HALVINGS = 30
# elements per batched ascent call (schemes x starts)
BATCH_ELEMENTS = 1 << 15


@dataclass
class SolverOptions:
    k: int | None = None
    starts: int = 32
    iters: int = 200
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    force: bool = False
    polish: bool = True
    polish_top: int = 8
    polish_window: float = 1e-3
    restarts: int = 8
    climb_rounds: int = 50
    neighbor_starts: int = 4


@dataclass
class MaximinResult:
    lam: np.ndarray
    value: float
    per_action: dict
    active_actions: list[str]
    iterations: int
    starts: int


@dataclass
class SchemeSearchResult:
    value: float
    strategy: GridStrategy
    per_action: dict
    scheme_index: int | None
    mode: str
    stats: dict = field(default_factory=dict)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of the last axis onto the probability simplex (sorting method)."""
    k = v.shape[-1]
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    ind = np.arange(1, k + 1)
    cond = u - css / ind > 0
    rho = k - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1)
    return np.maximum(v - theta, 0.0)


def start_points(n: int, k: int, starts: int, seed: int) -> np.ndarray:
    """Uniform weights first, then seeded Dirichlet(1) draws; shape (R, n, k)."""
    rng = np.random.default_rng(seed)
    pts = [np.full((n, k), 1.0 / k)]
    if starts > 1:
        pts.extend(rng.dirichlet(np.ones(k), size=(starts - 1, n)))
    return np.asarray(pts[:max(starts, 1)], dtype=float).reshape(-1, n, k)


def _values(M, lam, cell_index):
    # M (S, B, C), lam (S, R, n, k) -> E (S, R, B)
    W = weights(lam, cell_index)
    return np.einsum("sbc,src->srb", M, W)


def _subgradients(M, lam, cell_index, bstar):
    S, R, n, k = lam.shape
    C = cell_index.shape[0]
    Mb = np.take_along_axis(M[:, None, :, :], bstar[:, :, None, None], axis=2)[:, :, 0, :]
    factors = [lam[:, :, d, :][..., cell_index[:, d]] for d in range(n)]
    grad = np.zeros_like(lam)
    prefix = [np.ones((S, R, C))]
    for d in range(n - 1):
        prefix.append(prefix[-1] * factors[d])
    suffix = np.ones((S, R, C))
    for d in range(n - 1, -1, -1):
        contrib = Mb * prefix[d] * suffix
        for j in range(k):
            grad[:, :, d, j] = contrib[..., cell_index[:, d] == j].sum(axis=-1)
        suffix = suffix * factors[d]
    return grad


def batch_ascent(
    M: np.ndarray, lam0: np.ndarray, cell_index: np.ndarray, iters: int, tol: float = EPS_OPT
):
    """Projected subgradient ascent on min_b E_b for every (scheme, start) pair.

    M: (S, B, C) payoff tensors; lam0: (R, n, k) or (S, R, n, k) starting weights.
    Returns (lam, g, iterations) with lam (S, R, n, k) and g (S, R)."""
    S = M.shape[0]
    if lam0.ndim == 3:
        lam0 = np.broadcast_to(lam0, (S,) + lam0.shape)
    lam = project_simplex(np.array(lam0, dtype=float))
    R = lam.shape[1]
    M = M.astype(float)
    E = _values(M, lam, cell_index)
    g = E.min(axis=-1)
    bstar = E.argmin(axis=-1)
    active = np.ones((S, R), dtype=bool)
    it = 0
    while it < iters:
        si, ri = np.nonzero(active)
        if si.size == 0:
            break
        it += 1
        # gather active elements into a flat batch (one start per row)
        Ma = M[si]
        la = lam[si, ri][:, None]
        ga = g[si, ri]
        grad = _subgradients(Ma, la, cell_index, bstar[si, ri][:, None])
        step = np.full(si.size, INITIAL_STEP)
        pending = np.ones(si.size, dtype=bool)
        new_lam = la.copy()
        new_g = ga.copy()
        new_b = bstar[si, ri].copy()
        for _ in range(MAX_HALVINGS):
            idx = np.flatnonzero(pending)
            if idx.size == 0:
                break
            cand = project_simplex(la[idx] + step[idx, None, None, None] * grad[idx])
            Ec = _values(Ma[idx], cand, cell_index)[:, 0]
            gc = Ec.min(axis=-1)
            ok = gc > ga[idx]
            acc = idx[ok]
            new_lam[acc] = cand[ok]
            new_g[acc] = gc[ok]
            new_b[acc] = Ec[ok].argmin(axis=-1)
            pending[acc] = False
            step[idx[~ok]] *= 0.5
        lam[si, ri] = new_lam[:, 0]
        g[si, ri] = new_g
        bstar[si, ri] = new_b
        done = (new_g - ga) <= tol
        active[si[done], ri[done]] = False
    return lam, g, it


def _polish(M: np.ndarray, lam: np.ndarray, cell_index: np.ndarray, iters: int = 200):
    """Refine one scheme's weights on the epigraph form max t s.t. E_b(lam) >= t."""
    n, k = lam.shape
    B = M.shape[0]
    if n == 0:
        return lam, float(M[:, 0].min())

    def unpack(z):
        return z[:-1].reshape(n, k), z[-1]

    def cons_ineq(z):
        l, t = unpack(z)
        return expectations(M, l, cell_index) - t

    def jac_ineq(z):
        l, _ = unpack(z)
        G = gradients(M, l, cell_index).reshape(B, n * k)
        return np.hstack([G, -np.ones((B, 1))])

    eq_jac = np.zeros((n, n * k + 1))
    for d in range(n):
        eq_jac[d, d * k:(d + 1) * k] = 1.0

    t0 = float(expectations(M, lam, cell_index).min())
    z0 = np.concatenate([lam.ravel(), [t0]])
    obj_grad = np.zeros(n * k + 1)
    obj_grad[-1] = -1.0
    res = minimize(
        lambda z: -z[-1],
        z0,
        jac=lambda z: obj_grad,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * (n * k) + [(None, None)],
        constraints=[
            {"type": "ineq", "fun": cons_ineq, "jac": jac_ineq},
            {"type": "eq", "fun": lambda z: z[:-1].reshape(n, k).sum(axis=1) - 1.0,
             "jac": lambda z: eq_jac},
        ],
        options={"maxiter": iters, "ftol": 1e-14},
    )
    cand = np.clip(res.x[:-1].reshape(n, k), 0.0, None)
    cand = cand / cand.sum(axis=1, keepdims=True)
    g = float(expectations(M, cand, cell_index).min())
    if g > t0:
        return cand, g
    return lam, t0


def _maximin_tensor(M, cell_index, n, k, opts: SolverOptions, warm: Sequence[np.ndarray] = ()):
    starts = start_points(n, k, opts.starts, opts.seed)
    if warm:
        starts = np.concatenate([np.asarray(warm, dtype=float).reshape(-1, n, k), starts])
    lam, g, it = batch_ascent(M[None], starts, cell_index, opts.iters)
    r = int(np.argmax(g[0]))
    best_lam, best_g = lam[0, r], float(g[0, r])
    if opts.polish:
        best_lam, best_g = _polish(M.astype(float), best_lam, cell_index)
    return best_lam, best_g, it, starts.shape[0]


def maximin_lambda(
    dg: DiceyGame, scheme: Scheme, opts: SolverOptions | None = None,
    k: int | None = None, warm: Sequence[np.ndarray] = (),
) -> MaximinResult:
    """Best piece lengths found for one scheme (a lower bound on its true maximin)."""
    opts = opts or SolverOptions()
    k = k or opts.k or _scheme_k(dg, scheme)
    space = SchemeSpace(dg, k)
    M = space.tensors(space.indexed(scheme))[0]
    n = len(dg.dice)
    lam, g, it, R = _maximin_tensor(M, space.cell_index, n, k, opts, warm)
    E = expectations(M.astype(float), lam, space.cell_index)
    per = dict(zip(dg.devil_actions, map(float, E)))
    active = [b for b, e in per.items() if e - g <= EPS_ACT]
    return MaximinResult(lam, g, per, active, it, R)


def _scheme_k(dg: DiceyGame, scheme: Scheme) -> int:
    for p in dg.team_players:
        d = len(dg.accessible(p))
        if d:
            size = len(scheme[p])
            k = round(size ** (1.0 / d))
            for cand in (k - 1, k, k + 1):
                if cand >= 1 and cand**d == size:
                    return cand
    return len(dg.devil_actions)


def _chunks(total: int, size: int):
    for lo in range(0, total, size):
        yield lo, min(total, lo + size)


def _finish(dg, space, tables, lam, mode, index, stats) -> SchemeSearchResult:
    strat = space.strategy(tables, lam)
    ev = evaluate(dg, strat)
    return SchemeSearchResult(float(ev.value), strat, dict(ev.per_action), index, mode, stats)


def solve_exhaustive(dg: DiceyGame, opts: SolverOptions | None = None) -> SchemeSearchResult:
    opts = opts or SolverOptions()
    k = opts.k or len(dg.devil_actions)
    space = SchemeSpace(dg, k)
    space.check_budget(opts.budget, opts.force)
    t0 = time.perf_counter()
    n = len(dg.dice)
    ci = space.cell_index

    # dedupe identical payoff tensors, keeping the lowest scheme index
    seen: dict[bytes, int] = {}
    reps: list[int] = []
    tensors: list[np.ndarray] = []
    for lo, hi in _chunks(space.count, 1 << 14):
        T = space.tensors(space.decode(range(lo, hi)))
        flat = T.reshape(T.shape[0], -1)
        _, first = np.unique(flat, axis=0, return_index=True)
        for i in np.sort(first):
            key = flat[i].tobytes()
            if key not in seen:
                seen[key] = lo + int(i)
                reps.append(lo + int(i))
                tensors.append(T[i])
    M = np.asarray(tensors)
    reps = np.asarray(reps)

    # cheap bounds: a single pure cell is always reachable; no scheme beats its best cell per action
    upper = M.max(axis=2).min(axis=1)
    vertex = M.min(axis=1).max(axis=1)
    uniform = np.einsum("sbc,c->sb", M.astype(float), weights(np.full((n, k), 1.0 / k), ci)).min(axis=1)
    lower = float(max(vertex.max(), uniform.max()))
    keep = np.flatnonzero(upper >= lower - EPS_VAL)
    log.info("%d schemes, %d distinct tensors, %d after bounds", space.count, len(reps), len(keep))

    starts = start_points(n, k, opts.starts, opts.seed)
    R = starts.shape[0]
    per_chunk = max(1, BATCH_ELEMENTS // R)
    best_g = np.full(len(keep), -np.inf)
    best_lam = np.zeros((len(keep), n, k))
    iters = 0
    for lo, hi in _chunks(len(keep), per_chunk):
        lam, g, it = batch_ascent(M[keep[lo:hi]], starts, ci, opts.iters)
        iters = max(iters, it)
        r = np.argmax(g, axis=1)
        best_g[lo:hi] = g[np.arange(hi - lo), r]
        best_lam[lo:hi] = lam[np.arange(hi - lo), r]

    polished = 0
    if opts.polish and len(keep):
        top = np.flatnonzero(best_g >= best_g.max() - opts.polish_window)
        top = top[np.argsort(-best_g[top], kind="stable")][: opts.polish_top]
        for i in top:
            best_lam[i], best_g[i] = _polish(M[keep[i]].astype(float), best_lam[i], ci)
            polished += 1

    if len(keep):
        gmax = best_g.max()
        ties = np.flatnonzero(best_g >= gmax - EPS_VAL)
        win = ties[np.argmin(reps[keep[ties]])]
        index, lam = int(reps[keep[win]]), best_lam[win]
    else:
        index, lam = int(reps[0]), np.full((n, k), 1.0 / k)
    tables = [t[0] for t in space.decode([index])]
    stats = {
        "schemes_total": space.count,
        "distinct_tensors": int(len(reps)),
        "after_bounds": int(len(keep)),
        "starts": R,
        "max_iterations": iters,
        "polished": polished,
        "k": k,
        "seconds": time.perf_counter() - t0,
    }
    return _finish(dg, space, tables, lam, "exhaustive", index, stats)


def _conjecture_seed(dg: DiceyGame, k: int):
    from .families import build_conjecture_strategy, detect_clique_mp
    from .schemes import scheme_of_strategy

    n = detect_clique_mp(dg)
    if n is None or k < 2:
        return None
    strat = build_conjecture_strategy(n, dg)
    return scheme_of_strategy(dg, strat, k)


def solve_hybrid(dg: DiceyGame, opts: SolverOptions | None = None) -> SchemeSearchResult:
    """Seeded random schemes plus single-cell hill climbing with weight re-optimization."""
    opts = opts or SolverOptions()
    k = opts.k or len(dg.devil_actions)
    space = SchemeSpace(dg, k)
    t0 = time.perf_counter()
    rng = np.random.default_rng(opts.seed)
    n = len(dg.dice)
    ci = space.cell_index
    climb_opts = SolverOptions(starts=opts.neighbor_starts, iters=opts.iters,
                               seed=opts.seed, polish=False)

    seeds: list[tuple[list[np.ndarray], list[np.ndarray]]] = []
    conj = _conjecture_seed(dg, k)
    if conj is not None:
        seeds.append(([np.asarray(x) for x in space.indexed(conj[0])], [conj[1]]))
    for _ in range(opts.restarts):
        tabs = [rng.integers(0, r, size=(1, t)) for r, t in zip(space.radices, space.table_sizes)]
        seeds.append((tabs, []))

    best = (-np.inf, None, None)
    evaluated = 0
    for tabs, warm in seeds:
        M = space.tensors(tabs)[0]
        lam, g, _, _ = _maximin_tensor(M, ci, n, k, opts, warm)
        evaluated += 1
        for _ in range(opts.climb_rounds):
            neigh = []
            for pi, (r, t) in enumerate(zip(space.radices, space.table_sizes)):
                for c in range(t):
                    for a in range(r):
                        if a != tabs[pi][0, c]:
                            cand = [x.copy() for x in tabs]
                            cand[pi][0, c] = a
                            neigh.append(cand)
            if not neigh:
                break
            Ms = np.concatenate([space.tensors(c) for c in neigh])
            st = np.concatenate([lam[None], start_points(n, k, climb_opts.starts, opts.seed)])
            nl, ng, _ = batch_ascent(Ms, st, ci, opts.iters)
            evaluated += len(neigh)
            r = np.argmax(ng, axis=1)
            vals = ng[np.arange(len(neigh)), r]
            j = int(np.argmax(vals))
            if vals[j] <= g + EPS_VAL:
                break
            tabs, lam, g = neigh[j], nl[j, r[j]], float(vals[j])
        if opts.polish:
            lam, g = _polish(space.tensors(tabs)[0].astype(float), lam, ci)
        if g > best[0] + EPS_VAL:
            best = (g, tabs, lam)
    _, tabs, lam = best
    index = space.encode([t[0] for t in tabs])
    stats = {
        "schemes_total": space.count,
        "schemes_evaluated": evaluated,
        "restarts": len(seeds),
        "k": k,
        "seconds": time.perf_counter() - t0,
    }
    return _finish(dg, space, [t[0] for t in tabs], lam, "hybrid", index, stats)


def solve(dg: DiceyGame, mode: str = "exhaustive", opts: SolverOptions | None = None,
          **kw) -> SchemeSearchResult:
    """Search k-grid strategies for the best value (k defaults to |A_Devil|).

    ``mode="auto"`` runs exhaustively when the scheme count fits the budget."""
    opts = opts or SolverOptions(**kw)
    if mode == "auto":
        space = SchemeSpace(dg, opts.k or len(dg.devil_actions))
        mode = "exhaustive" if space.count <= opts.budget else "hybrid"
    if mode == "exhaustive":
        return solve_exhaustive(dg, opts)
    if mode == "hybrid":
        return solve_hybrid(dg, opts)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class ThresholdAnswer:
    verdict: str  # "YES" or "NO_WITHIN_SEARCH"
    threshold: Fraction | float
    best: SchemeSearchResult

    @property
    def yes(self) -> bool:
        return self.verdict == "YES"


def check_threshold(dg: DiceyGame, t, mode: str = "auto",
                    opts: SolverOptions | None = None, eps: float = EPS_VAL) -> ThresholdAnswer:
    """YES with a witness when a strategy of value >= t - eps is found.

    A negative answer only means the search found nothing; it is not a refutation."""
    res = solve(dg, mode, opts)
    verdict = "YES" if res.value >= float(t) - eps else "NO_WITHIN_SEARCH"
    return ThresholdAnswer(verdict, t, res)


__all__ = [
    "BudgetExceeded",
    "MaximinResult",
    "SchemeSearchResult",
    "SolverOptions",
    "ThresholdAnswer",
    "batch_ascent",
    "check_threshold",
    "maximin_lambda",
    "project_simplex",
    "solve",
    "solve_exhaustive",
    "solve_hybrid",
]
