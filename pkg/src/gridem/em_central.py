"""Centralized predictive energy management.

Each tick builds one strictly convex QP over the stacked decision vector
(generator powers, battery powers, battery SoC trajectories, all over the
horizon) and solves it with the operator-splitting solver. Problems are
assembled and solved in megawatts; the public interface is SI watts.

Constraint rows, per device and horizon step: power box, ramp (first step
anchored to the measured previous command), SoC box, SoC chain equality,
and the per-step supply/demand balance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import MW, ScenarioConfig, with_weights
from .qpsolve import QpProblem, QpSolver, Settings

REGULARIZATION = 1.0e-9  # on otherwise-unweighted variables, keeps P SPD
SLACK_WEIGHT = 1.0e6  # balance-relaxation penalty, per MW


@dataclass(frozen=True)
class Measurements:
    """Tick-time measurements handed to the EM layer (SI units)."""

    p_g_prev: tuple[float, ...]  # W, previous applied generator commands
    p_b_prev: tuple[float, ...]  # W, previous applied battery commands
    q: tuple[float, ...]  # SoC per battery
    p_l: float  # W, load held constant over the horizon


@dataclass
class Allocation:
    """Solved horizon profiles; first step is the command to apply."""

    p_g: np.ndarray  # (n_g, h) W
    p_b: np.ndarray  # (n_b, h) W
    soc: np.ndarray  # (n_b, h)
    status: str
    iterations: int
    balance_residual_w: float
    fallback: bool = False
    residual_history: list = field(default_factory=list)

    @property
    def gen_commands(self) -> np.ndarray:
        return self.p_g[:, 0] if self.p_g.size else np.zeros(0)

    @property
    def batt_commands(self) -> np.ndarray:
        return self.p_b[:, 0] if self.p_b.size else np.zeros(0)


def scenario_weights(scenario: int) -> tuple[float, float, float]:
    """Objective-weight presets (beta, gamma_p, gamma_q).

    1: generator tracking only; 2: battery power heavily penalized;
    3: battery SoC deviation heavily penalized.
    """
    presets = {1: (1.0, 0.0, 0.0), 2: (1.0, 1000.0, 0.0), 3: (1.0, 0.0, 1000.0)}
    if scenario not in presets:
        raise ValueError(f"unknown scenario id {scenario!r}, expected 1, 2 or 3")
    return presets[scenario]


def apply_scenario(cfg: ScenarioConfig, scenario: int) -> ScenarioConfig:
    beta, gamma_p, gamma_q = scenario_weights(scenario)
    return with_weights(cfg, beta=beta, gamma_p=gamma_p, gamma_q=gamma_q)


class CentralEm:
    """Reusable centralized MPC instance; warm-starts across ticks."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.h = cfg.horizon_steps
        self.gens = cfg.fleet.generators
        self.batts = cfg.fleet.batteries
        self.n_g = len(self.gens)
        self.n_b = len(self.batts)
        self.n = (self.n_g + 2 * self.n_b) * self.h
        self.kappa_mw = np.array(
            [cfg.soc_kappa(b) * MW for b in self.batts]
        )  # SoC change per MW-step
        self._build_static()
        settings = Settings(
            eps_abs=cfg.qp_eps, eps_rel=cfg.qp_eps, max_iters=cfg.qp_max_iters
        )
        self.solver = QpSolver(self.P, self.A, settings)
        self._fallback_solver = None

    # --- static structure -------------------------------------------------
    def _gen_block(self, i: int) -> slice:
        return slice(i * self.h, (i + 1) * self.h)

    def _batt_p_block(self, j: int) -> slice:
        base = (self.n_g + j) * self.h
        return slice(base, base + self.h)

    def _batt_q_block(self, j: int) -> slice:
        base = (self.n_g + self.n_b + j) * self.h
        return slice(base, base + self.h)

    def _build_static(self) -> None:
        h, n = self.h, self.n
        diag = np.empty(n)
        lin_base = np.zeros(n)
        for i, g in enumerate(self.gens):
            w = g.beta if g.beta > 0.0 else REGULARIZATION
            blk = self._gen_block(i)
            diag[blk] = w
            lin_base[blk] = -w * (g.p_rated_w / MW)
        for j, b in enumerate(self.batts):
            wp = b.gamma_p if b.gamma_p > 0.0 else REGULARIZATION
            wq = b.gamma_q if b.gamma_q > 0.0 else REGULARIZATION
            diag[self._batt_p_block(j)] = wp
            blk = self._batt_q_block(j)
            diag[blk] = wq
            lin_base[blk] = -wq * b.soc_initial
        self.P = np.diag(diag)
        self.lin_base = lin_base

        rows = []
        l_parts, u_parts = [], []
        self._anchor_rows_g = []
        self._anchor_rows_b = []
        self._chain_rows = []

        def add_box(block: slice, lo: float, hi: float):
            for k in range(h):
                r = np.zeros(n)
                r[block.start + k] = 1.0
                rows.append(r)
                l_parts.append(lo)
                u_parts.append(hi)

        def add_ramp(block: slice, ramp: float, anchors: list):
            anchors.append(len(rows))
            r = np.zeros(n)
            r[block.start] = 1.0
            rows.append(r)
            l_parts.append(-np.inf)  # overwritten per tick
            u_parts.append(np.inf)
            for k in range(1, h):
                r = np.zeros(n)
                r[block.start + k] = 1.0
                r[block.start + k - 1] = -1.0
                rows.append(r)
                l_parts.append(-ramp)
                u_parts.append(ramp)

        for i, g in enumerate(self.gens):
            add_box(self._gen_block(i), g.p_min_w / MW, g.p_max_w / MW)
            add_ramp(self._gen_block(i), g.ramp_w / MW, self._anchor_rows_g)
        for j, b in enumerate(self.batts):
            add_box(self._batt_p_block(j), b.p_min_w / MW, b.p_max_w / MW)
            add_ramp(self._batt_p_block(j), b.ramp_w / MW, self._anchor_rows_b)
            add_box(self._batt_q_block(j), b.soc_min, b.soc_max)
            self._chain_rows.append(len(rows))
            for k in range(h):
                r = np.zeros(n)
                r[self._batt_q_block(j).start + k] = 1.0
                r[self._batt_p_block(j).start + k] = self.kappa_mw[j]
                if k > 0:
                    r[self._batt_q_block(j).start + k - 1] = -1.0
                rows.append(r)
                l_parts.append(0.0)  # row 0 rhs overwritten per tick
                u_parts.append(0.0)
        self._balance_rows = len(rows)
        for k in range(h):
            r = np.zeros(n)
            for i in range(self.n_g):
                r[self._gen_block(i).start + k] = 1.0
            for j in range(self.n_b):
                r[self._batt_p_block(j).start + k] = 1.0
            rows.append(r)
            l_parts.append(0.0)  # rhs overwritten per tick
            u_parts.append(0.0)
        self.A = np.array(rows) if rows else np.zeros((0, n))
        self.l_base = np.array(l_parts)
        self.u_base = np.array(u_parts)
        self.m = self.A.shape[0]

    # --- per-tick vectors ---------------------------------------------------
    def _vectors(self, meas: Measurements):
        if len(meas.p_g_prev) != self.n_g or len(meas.p_b_prev) != self.n_b:
            raise ValueError("measurement dimensions do not match the fleet")
        if len(meas.q) != self.n_b:
            raise ValueError("measurement dimensions do not match the fleet")
        lin = self.lin_base.copy()
        l = self.l_base.copy()
        u = self.u_base.copy()
        for i, g in enumerate(self.gens):
            prev = meas.p_g_prev[i] / MW
            ramp = g.ramp_w / MW
            row = self._anchor_rows_g[i]
            l[row] = prev - ramp
            u[row] = prev + ramp
        for j, b in enumerate(self.batts):
            prev = meas.p_b_prev[j] / MW
            ramp = b.ramp_w / MW
            row = self._anchor_rows_b[j]
            l[row] = prev - ramp
            u[row] = prev + ramp
            l[self._chain_rows[j]] = meas.q[j]
            u[self._chain_rows[j]] = meas.q[j]
        p_l_mw = meas.p_l / MW
        l[self._balance_rows : self._balance_rows + self.h] = p_l_mw
        u[self._balance_rows : self._balance_rows + self.h] = p_l_mw
        return lin, l, u

    def build(self, meas: Measurements) -> QpProblem:
        lin, l, u = self._vectors(meas)
        return QpProblem(P=self.P.copy(), q=lin, A=self.A.copy(), l=l, u=u)

    # --- solve ---------------------------------------------------------------
    def solve(self, meas: Measurements) -> Allocation:
        lin, l, u = self._vectors(meas)
        sol = self.solver.solve(lin, l, u, warm=True)
        fallback = False
        if sol.status == "infeasible":
            sol = self._solve_fallback(meas)
            fallback = True
        x = sol.x[: self.n]
        return self._allocation(x, meas, sol.status, sol.iterations, fallback)

    def _allocation(self, x, meas, status, iterations, fallback) -> Allocation:
        h = self.h
        p_g = np.array([x[self._gen_block(i)] * MW for i in range(self.n_g)])
        p_b = np.array([x[self._batt_p_block(j)] * MW for j in range(self.n_b)])
        soc = np.array([x[self._batt_q_block(j)] for j in range(self.n_b)])
        p_g = p_g.reshape(self.n_g, h)
        p_b = p_b.reshape(self.n_b, h)
        soc = soc.reshape(self.n_b, h)
        supplied = p_g.sum(axis=0) + p_b.sum(axis=0) if (self.n_g + self.n_b) else np.zeros(h)
        residual = float(np.max(np.abs(supplied - meas.p_l))) if h else 0.0
        return Allocation(
            p_g=p_g,
            p_b=p_b,
            soc=soc,
            status=status,
            iterations=iterations,
            balance_residual_w=residual,
            fallback=fallback,
        )

    def _solve_fallback(self, meas: Measurements):
        """Re-solve with slack on the balance rows, heavily penalized.

        Keeps the controller alive on ticks where demand cannot be met
        inside the device envelopes; the slack shows up as a nonzero
        balance residual in the allocation.
        """
        if self._fallback_solver is None:
            h, n = self.h, self.n
            n_ext = n + h
            P = np.zeros((n_ext, n_ext))
            P[:n, :n] = self.P
            P[n:, n:] = SLACK_WEIGHT * np.eye(h)
            A = np.zeros((self.m, n_ext))
            A[:, :n] = self.A
            for k in range(h):
                A[self._balance_rows + k, n + k] = -1.0
            settings = Settings(
                eps_abs=self.cfg.qp_eps,
                eps_rel=self.cfg.qp_eps,
                max_iters=self.cfg.qp_max_iters,
            )
            self._fallback_A = A
            self._fallback_P = P
            self._fallback_solver = QpSolver(P, A, settings)
        lin, l, u = self._vectors(meas)
        lin_ext = np.concatenate([lin, np.zeros(self.h)])
        return self._fallback_solver.solve(lin_ext, l, u, warm=False)


def build_central_qp(cfg: ScenarioConfig, meas: Measurements) -> QpProblem:
    """Assemble the per-tick centralized QP (megawatt units)."""
    return CentralEm(cfg).build(meas)


def solve_central_mpc(cfg: ScenarioConfig, meas: Measurements) -> Allocation:
    """Build and solve the centralized problem for one tick."""
    return CentralEm(cfg).solve(meas)
