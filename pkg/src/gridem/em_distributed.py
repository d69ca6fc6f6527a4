"""Distributed energy management by dual ascent on the balance constraint.

Each generator and battery solves a small nodal QP given the current price
vector lambda (one entry per horizon step); a star-topology coordinator
sums the nodal profiles, performs the gradient-ascent price update
lambda <- lambda + alpha (sum p - p_f 1), and stops when the balance
residual falls below tolerance. Nodes only couple through lambda, so the
converged allocation matches the centralized solution of the same convex
program.

Node problems are posed and solved in megawatts; lambda therefore carries
per-MW scaling so the customary step size alpha = 0.1 behaves as expected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import MW, BattParams, ConfigError, GenParams, ScenarioConfig
from .em_central import Allocation, Measurements
from .qpsolve import QpSolver, Settings

REGULARIZATION = 1.0e-9
DIVERGENCE_FACTOR = 50.0
DIVERGENCE_GRACE = 20  # iterations before the guard may trip


@dataclass(frozen=True)
class DualState:
    """Coordinator state: price vector, iteration count, balance residual."""

    lam: np.ndarray  # per-MW units, length h
    iteration: int = 0
    residual_w: float = float("inf")


def dual_update(
    state: DualState, node_sum_mw: np.ndarray, p_f_mw: float, alpha: float
) -> DualState:
    """One gradient-ascent step on the dual of the balance constraint."""
    if alpha <= 0.0:
        raise ValueError("alpha must be > 0")
    mismatch = np.asarray(node_sum_mw, dtype=float) - p_f_mw
    lam = state.lam + alpha * mismatch
    residual_w = float(np.max(np.abs(mismatch))) * MW if mismatch.size else 0.0
    return DualState(lam=lam, iteration=state.iteration + 1, residual_w=residual_w)


class _PgmNode:
    """Nodal problem of one generator: track its rated point, pay lambda."""

    def __init__(self, params: GenParams, h: int, settings: Settings):
        self.params = params
        self.h = h
        self.beta = params.beta if params.beta > 0.0 else REGULARIZATION
        self.p_rated_mw = params.p_rated_w / MW
        self.lo_mw = params.p_min_w / MW
        self.hi_mw = params.p_max_w / MW
        self.ramp_mw = params.ramp_w / MW
        a = np.zeros((2 * h, h))
        a[:h, :] = np.eye(h)
        a[h, 0] = 1.0
        for k in range(1, h):
            a[h + k, k] = 1.0
            a[h + k, k - 1] = -1.0
        self.A = a
        self.solver = QpSolver(self.beta * np.eye(h), a, settings)
        self.l = np.concatenate(
            [np.full(h, self.lo_mw), np.zeros(1), np.full(h - 1, -self.ramp_mw)]
        )
        self.u = np.concatenate(
            [np.full(h, self.hi_mw), np.zeros(1), np.full(h - 1, self.ramp_mw)]
        )

    def solve(self, lam: np.ndarray, p_prev_mw: float) -> np.ndarray:
        lo_anchor = p_prev_mw - self.ramp_mw
        hi_anchor = p_prev_mw + self.ramp_mw
        if max(lo_anchor, self.lo_mw) > min(hi_anchor, self.hi_mw):
            raise ConfigError(
                f"{self.params.name}: ramp window around previous command "
                "does not intersect the power box"
            )
        l = self.l.copy()
        u = self.u.copy()
        l[self.h] = lo_anchor
        u[self.h] = hi_anchor
        lin = -self.beta * np.full(self.h, self.p_rated_mw) + lam
        sol = self.solver.solve(lin, l, u, warm=True)
        return sol.x


class _PcmNode:
    """Nodal problem of one battery: penalized power, SoC chain and boxes."""

    def __init__(self, params: BattParams, h: int, kappa_mw: float, settings: Settings):
        self.params = params
        self.h = h
        self.kappa_mw = kappa_mw
        self.gamma = params.gamma_p if params.gamma_p > 0.0 else REGULARIZATION
        self.lo_mw = params.p_min_w / MW
        self.hi_mw = params.p_max_w / MW
        self.ramp_mw = params.ramp_w / MW
        n = 2 * h
        diag = np.concatenate([np.full(h, self.gamma), np.full(h, REGULARIZATION)])
        self.P = np.diag(diag)
        rows = []
        for k in range(h):  # power box
            r = np.zeros(n)
            r[k] = 1.0
            rows.append(r)
        r = np.zeros(n)  # ramp anchor
        r[0] = 1.0
        rows.append(r)
        for k in range(1, h):
            r = np.zeros(n)
            r[k] = 1.0
            r[k - 1] = -1.0
            rows.append(r)
        for k in range(h):  # SoC box
            r = np.zeros(n)
            r[h + k] = 1.0
            rows.append(r)
        for k in range(h):  # SoC chain: q_k - q_{k-1} + kappa p_k = 0
            r = np.zeros(n)
            r[h + k] = 1.0
            r[k] = kappa_mw
            if k > 0:
                r[h + k - 1] = -1.0
            rows.append(r)
        self.A = np.array(rows)
        self.solver = QpSolver(self.P, self.A, settings)
        self.l = np.concatenate(
            [
                np.full(h, self.lo_mw),
                np.zeros(1),
                np.full(h - 1, -self.ramp_mw),
                np.full(h, params.soc_min),
                np.zeros(h),
            ]
        )
        self.u = np.concatenate(
            [
                np.full(h, self.hi_mw),
                np.zeros(1),
                np.full(h - 1, self.ramp_mw),
                np.full(h, params.soc_max),
                np.zeros(h),
            ]
        )
        self._chain_row = 3 * h

    def solve(
        self, lam: np.ndarray, p_prev_mw: float, q_meas: float
    ) -> tuple[np.ndarray, np.ndarray]:
        h = self.h
        lo_anchor = p_prev_mw - self.ramp_mw
        hi_anchor = p_prev_mw + self.ramp_mw
        if max(lo_anchor, self.lo_mw) > min(hi_anchor, self.hi_mw):
            raise ConfigError(
                f"{self.params.name}: ramp window around previous command "
                "does not intersect the power box"
            )
        l = self.l.copy()
        u = self.u.copy()
        l[h] = lo_anchor
        u[h] = hi_anchor
        l[self._chain_row] = q_meas
        u[self._chain_row] = q_meas
        lin = np.concatenate(
            [lam, np.full(h, -REGULARIZATION * self.params.soc_initial)]
        )
        sol = self.solver.solve(lin, l, u, warm=True)
        return sol.x[:h], sol.x[h:]


def solve_pgm_node(
    params: GenParams,
    lam: np.ndarray,
    p_prev: float,
    settings: Settings | None = None,
) -> np.ndarray:
    """Solve one generator node; lambda in per-MW units, result in watts."""
    lam = np.asarray(lam, dtype=float)
    node = _PgmNode(params, len(lam), settings or Settings())
    return node.solve(lam, p_prev / MW) * MW


def solve_pcm_node(
    params: BattParams,
    lam: np.ndarray,
    p_prev: float,
    q_meas: float,
    kappa: float,
    settings: Settings | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve one battery node.

    ``kappa`` is the SoC sensitivity T_s / (Q v_bus) in 1/W; lambda is in
    per-MW units. Returns the power profile in watts and the SoC profile.
    """
    if kappa <= 0.0:
        raise ValueError("kappa must be > 0")
    lam = np.asarray(lam, dtype=float)
    node = _PcmNode(params, len(lam), kappa * MW, settings or Settings())
    p_mw, soc = node.solve(lam, p_prev / MW, q_meas)
    return p_mw * MW, soc


class DistributedEm:
    """Dual-ascent coordinator over persistent generator/battery nodes."""

    def __init__(self, cfg: ScenarioConfig):
        if cfg.dual_step <= 0.0:
            raise ConfigError("distributed mode requires dual_step > 0")
        self.cfg = cfg
        self.h = cfg.horizon_steps
        settings = Settings(
            eps_abs=cfg.qp_eps, eps_rel=cfg.qp_eps, max_iters=cfg.qp_max_iters
        )
        self.gen_nodes = [_PgmNode(g, self.h, settings) for g in cfg.fleet.generators]
        self.batt_nodes = [
            _PcmNode(b, self.h, cfg.soc_kappa(b) * MW, settings)
            for b in cfg.fleet.batteries
        ]
        self.lam = np.zeros(self.h)
        self.eps_tol_mw = cfg.eps_tol_w / MW
        self.alpha = cfg.dual_step

    def solve(self, meas: Measurements) -> Allocation:
        h = self.h
        lam = self.lam.copy() if self.cfg.warm_start else np.zeros(h)
        p_f_mw = meas.p_l / MW
        prev_g = [p / MW for p in meas.p_g_prev]
        prev_b = [p / MW for p in meas.p_b_prev]
        history: list[float] = []
        best_r = float("inf")
        best = None
        status = "max_iters"
        iterations = self.cfg.max_iters
        for it in range(1, self.cfg.max_iters + 1):
            profs_g = [
                node.solve(lam, prev_g[i]) for i, node in enumerate(self.gen_nodes)
            ]
            solved_b = [
                node.solve(lam, prev_b[j], meas.q[j])
                for j, node in enumerate(self.batt_nodes)
            ]
            node_sum = np.zeros(h)
            for p in profs_g:
                node_sum += p
            for p, _ in solved_b:
                node_sum += p
            mismatch = node_sum - p_f_mw
            r = float(np.max(np.abs(mismatch)))
            history.append(r * MW)
            lam = lam + self.alpha * mismatch
            if r < best_r:
                best_r = r
                best = (profs_g, solved_b)
            if r <= self.eps_tol_mw:
                status = "converged"
                iterations = it
                break
            if (it > DIVERGENCE_GRACE and r > DIVERGENCE_FACTOR * max(best_r, self.eps_tol_mw)) or not np.isfinite(r):
                status = "diverged"
                iterations = it
                break
        if self.cfg.warm_start:
            self.lam = lam
        if status != "converged" and best is not None:
            profs_g, solved_b = best  # best iterate, flagged non-converged
        p_g = (
            np.array([p * MW for p in profs_g])
            if profs_g
            else np.zeros((0, h))
        )
        p_b = (
            np.array([p * MW for p, _ in solved_b])
            if solved_b
            else np.zeros((0, h))
        )
        soc = (
            np.array([s for _, s in solved_b]) if solved_b else np.zeros((0, h))
        )
        supplied = p_g.sum(axis=0) + p_b.sum(axis=0)
        residual = float(np.max(np.abs(supplied - meas.p_l)))
        return Allocation(
            p_g=p_g,
            p_b=p_b,
            soc=soc,
            status=status,
            iterations=iterations,
            balance_residual_w=residual,
            residual_history=history,
        )


def coordinate(cfg: ScenarioConfig, meas: Measurements) -> Allocation:
    """One-tick distributed solve with a fresh coordinator (cold start)."""
    em = DistributedEm(cfg)
    return em.solve(meas)
