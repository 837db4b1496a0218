"""Fritz John stationarity certificates for a scheme's maximin problem.

The problem is: maximize t subject to E_b(lam) - t >= 0 for every Devil action b,
lam[D, j] >= 0, and sum_j lam[D, j] = 1 for every die. Each sum-to-one equality
gets one free multiplier. With that formulation a certificate exists with a
nonzero multiplier vector iff some nonnegative multiplier is positive, which is
what the linear programs below decide.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .game import DiceyGame, GameError
from .optimizer import EPS_ACT, _scheme_k
from .schemes import Scheme, SchemeSpace, expectations, gradients

FEASIBLE = "FEASIBLE"
INFEASIBLE = "INFEASIBLE"

RESIDUAL_TOL = 1e-6


class InfeasiblePoint(GameError):
    def __init__(self, violations: list[str]):
        super().__init__("point violates the system: " + "; ".join(violations))
        self.violations = violations


@dataclass
class FritzJohnCertificate:
    status: str
    alpha0: float
    alpha_payoff: dict  # devil action -> multiplier
    alpha_nonneg: dict  # (die, piece) -> multiplier
    mu: dict  # die -> free multiplier
    residual: float
    active_payoff: list = field(default_factory=list)
    active_nonneg: list = field(default_factory=list)
    tolerance: float = RESIDUAL_TOL

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "alpha0": self.alpha0,
            "alpha_payoff": self.alpha_payoff,
            "alpha_nonneg": {f"{d}:{j}": v for (d, j), v in self.alpha_nonneg.items()},
            "mu": self.mu,
            "residual": self.residual,
            "active_payoff": self.active_payoff,
            "active_nonneg": [f"{d}:{j}" for d, j in self.active_nonneg],
            "tolerance": self.tolerance,
            "normalization": "alpha0 + sum(alpha) + sum(|mu|) = 1",
        }


def certify_fritz_john(
    dg: DiceyGame, scheme: Scheme, lam, t: float, k: int | None = None,
    tol: float = RESIDUAL_TOL, eps_act: float = EPS_ACT,
) -> FritzJohnCertificate:
    """Search multipliers certifying that (lam, t) is a Fritz John point.

    Raises InfeasiblePoint when (lam, t) does not satisfy the system."""
    lam = np.asarray(lam, dtype=float)
    if k is None:
        k = lam.shape[1] if lam.ndim == 2 else _scheme_k(dg, scheme)
    space = SchemeSpace(dg, k)
    M = space.tensors(space.indexed(scheme))[0].astype(float)
    n = len(dg.dice)
    lam = lam.reshape(n, k)
    ci = space.cell_index
    E = expectations(M, lam, ci)
    G = gradients(M, lam, ci).reshape(len(E), n * k)
    actions = dg.devil_actions

    bad = []
    for b, e in zip(actions, E):
        if e - t < -eps_act:
            bad.append(f"payoff constraint {b}: {e - t:.3g} < 0")
    for i, d in enumerate(dg.dice):
        if abs(lam[i].sum() - 1) > eps_act:
            bad.append(f"die {d}: weights sum to {lam[i].sum()}")
        for j in range(k):
            if lam[i, j] < -eps_act:
                bad.append(f"die {d} piece {j}: negative weight {lam[i, j]}")
    if bad:
        raise InfeasiblePoint(bad)

    act_b = [b for b, e in enumerate(E) if e - t <= eps_act]
    act_l = [(i, j) for i in range(n) for j in range(k) if lam[i, j] <= eps_act]

    # columns: alpha0, alpha_b (active), alpha_Dj (active), mu_D (free)
    nv = n * k + 1
    cols = []
    col = np.zeros(nv)
    col[-1] = 1.0
    cols.append(col)
    for b in act_b:
        cols.append(np.concatenate([G[b], [-1.0]]))
    for i, j in act_l:
        col = np.zeros(nv)
        col[i * k + j] = 1.0
        cols.append(col)
    n_nonneg = len(cols)
    for i in range(n):
        col = np.zeros(nv)
        col[i * k:(i + 1) * k] = 1.0
        cols.append(col)
    A = np.column_stack(cols)  # stationarity: A @ x = 0
    nx = A.shape[1]
    bounds = [(0, None)] * n_nonneg + [(None, None)] * n + [(0, None)]
    norm = np.concatenate([np.ones(n_nonneg), np.zeros(n), [0.0]])

    # LP1: minimal max-norm residual under sum of nonnegative multipliers = 1
    A_ub = np.vstack([np.hstack([A, -np.ones((nv, 1))]), np.hstack([-A, -np.ones((nv, 1))])])
    b_ub = np.zeros(2 * nv)
    c = np.zeros(nx + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=norm[None], b_eq=[1.0],
                  bounds=bounds, method="highs")
    if not res.success:
        raise GameError(f"certificate LP failed: {res.message}")
    best_residual = float(res.x[-1])
    x = res.x[:-1]
    if best_residual <= tol:
        # LP2: among certificates within tolerance, maximize alpha0
        c2 = np.zeros(nx + 1)
        c2[0] = -1.0
        bounds2 = bounds[:-1] + [(0, min(tol, best_residual + 1e-9))]
        res2 = linprog(c2, A_ub=A_ub, b_ub=b_ub, A_eq=norm[None], b_eq=[1.0],
                       bounds=bounds2, method="highs")
        if res2.success:
            x = res2.x[:-1]
    scale = np.abs(x).sum()
    x = x / scale
    residual = float(np.abs(A @ x).max())
    status = FEASIBLE if best_residual <= tol and residual <= tol else INFEASIBLE
    alpha_payoff = {b: 0.0 for b in actions}
    for pos, b in enumerate(act_b, start=1):
        alpha_payoff[actions[b]] = float(x[pos])
    alpha_nonneg = {(d, j): 0.0 for d in dg.dice for j in range(k)}
    for pos, (i, j) in enumerate(act_l, start=1 + len(act_b)):
        alpha_nonneg[(dg.dice[i], j)] = float(x[pos])
    mu = {d: float(x[n_nonneg + i]) for i, d in enumerate(dg.dice)}
    return FritzJohnCertificate(
        status,
        float(x[0]),
        alpha_payoff,
        alpha_nonneg,
        mu,
        residual,
        [actions[b] for b in act_b],
        [(dg.dice[i], j) for i, j in act_l],
        tol,
    )
