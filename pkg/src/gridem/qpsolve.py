"""Strictly convex QP solver in operator-splitting form.

Canonical problem::

    minimize   0.5 x' P x + q' x
    subject to l <= A x <= u        (equality rows have l == u)

solved by scaled ADMM on the splitting (x, z = A x): one KKT factorization
per problem structure, row equilibration of A, per-row penalties with a
boosted penalty on equality rows, and an active-set polish step that
refines a converged iterate to near machine precision. Re-solving with new
(q, l, u) reuses the factorization and warm-starts from the previous
iterate, which is how the energy-management layers call it every tick.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

INF = float("inf")


@dataclass
class QpProblem:
    P: np.ndarray
    q: np.ndarray
    A: np.ndarray
    l: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.l = np.asarray(self.l, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        n = self.P.shape[0]
        m = self.A.shape[0]
        if self.P.shape != (n, n):
            raise ValueError("P must be square")
        if not np.allclose(self.P, self.P.T, atol=1e-12):
            raise ValueError("P must be symmetric")
        if self.q.shape != (n,):
            raise ValueError("q has wrong length")
        if self.A.shape != (m, n):
            raise ValueError("A has wrong shape")
        if self.l.shape != (m,) or self.u.shape != (m,):
            raise ValueError("bounds have wrong length")
        if np.any(self.l > self.u):
            raise ValueError("requires l <= u componentwise")

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ self.P @ x) + float(self.q @ x)


@dataclass
class Settings:
    rho: float = 1.0
    sigma: float = 1.0e-6
    eps_abs: float = 1.0e-6
    eps_rel: float = 1.0e-6
    max_iters: int = 4000
    rho_eq_scale: float = 1.0e3  # penalty boost on equality rows
    eps_infeasible: float = 1.0e-8
    polish: bool = True
    polish_delta: float = 1.0e-9
    # Residual-ratio rho adaptation; a fixed rho stalls on ticks where
    # weakly-weighted state variables hit their boxes. Fully deterministic:
    # updates depend only on the iterate sequence.
    adaptive_rho: bool = True
    rho_update_every: int = 25
    rho_update_threshold: float = 5.0
    rho_min: float = 1.0e-6
    rho_max: float = 1.0e6


@dataclass
class QpSolution:
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    status: str  # "optimal" | "max_iters" | "infeasible"
    iterations: int
    primal_res: float
    dual_res: float
    polished: bool = False
    residual_history: list = field(default_factory=list)


class QpSolver:
    """Reusable solver bound to one (P, A) structure.

    ``solve`` accepts fresh (q, l, u) each call; the KKT factorization is
    computed once per equality-row pattern and reused, and iterates are
    warm-started from the previous solve unless told otherwise.
    """

    def __init__(self, P: np.ndarray, A: np.ndarray, settings: Settings | None = None):
        self.settings = settings or Settings()
        self.P = np.asarray(P, dtype=float)
        self.A = np.asarray(A, dtype=float)
        self.n = self.P.shape[0]
        self.m = self.A.shape[0]
        # Row equilibration of A; zero rows keep scale 1.
        norms = np.linalg.norm(self.A, axis=1) if self.m else np.zeros(0)
        self.d = np.where(norms > 0.0, 1.0 / np.maximum(norms, 1e-300), 1.0)
        self.As = self.d[:, None] * self.A if self.m else self.A
        self._factor = None
        self._eq_key = None
        self._rho_vec = None
        self._rho_base = self.settings.rho
        self._x = np.zeros(self.n)
        self._zs = np.zeros(self.m)
        self._ys = np.zeros(self.m)

    def _factorize(self, eq_mask: np.ndarray) -> None:
        s = self.settings
        rho_vec = np.full(self.m, self._rho_base)
        rho_vec[eq_mask] = self._rho_base * s.rho_eq_scale
        kkt = np.zeros((self.n + self.m, self.n + self.m))
        kkt[: self.n, : self.n] = self.P + s.sigma * np.eye(self.n)
        kkt[: self.n, self.n :] = self.As.T
        kkt[self.n :, : self.n] = self.As
        kkt[self.n :, self.n :] = -np.diag(1.0 / rho_vec)
        self._factor = scipy.linalg.lu_factor(kkt)
        self._rho_vec = rho_vec
        self._eq_key = eq_mask.tobytes()

    def solve(
        self,
        q: np.ndarray,
        l: np.ndarray,
        u: np.ndarray,
        warm: bool = True,
        record_history: bool = False,
    ) -> QpSolution:
        s = self.settings
        q = np.asarray(q, dtype=float)
        l = np.asarray(l, dtype=float)
        u = np.asarray(u, dtype=float)
        if np.any(l > u):
            raise ValueError("requires l <= u componentwise")
        ls = self.d * l
        us = self.d * u
        eq_mask = l == u
        if self._factor is None or eq_mask.tobytes() != self._eq_key:
            self._factorize(eq_mask)
        rho = self._rho_vec
        if not warm:
            self._x = np.zeros(self.n)
            self._zs = np.clip(np.zeros(self.m), ls, us)
            self._ys = np.zeros(self.m)
        x, zs, ys = self._x, np.clip(self._zs, ls, us), self._ys

        history = []
        status = "max_iters"
        iterations = s.max_iters
        r_pri = r_dua = INF
        ys_prev = ys.copy()
        rhs = np.empty(self.n + self.m)
        for it in range(1, s.max_iters + 1):
            rhs[: self.n] = s.sigma * x - q
            rhs[self.n :] = zs - ys / rho
            sol = scipy.linalg.lu_solve(self._factor, rhs)
            x = sol[: self.n]
            nu = sol[self.n :]
            z_tilde = zs + (nu - ys) / rho
            zs_new = np.clip(z_tilde + ys / rho, ls, us)
            ys = ys + rho * (z_tilde - zs_new)
            zs = zs_new

            r_pri, r_dua, eps_pri, eps_dua, pri_norm, dua_norm = self._residuals(
                q, x, zs, ys
            )
            if record_history:
                history.append((r_pri, r_dua))
            if r_pri <= eps_pri and r_dua <= eps_dua:
                status = "optimal"
                iterations = it
                break
            if it >= 50 and it % 25 == 0:
                if self._primal_infeasible(l, u, ys - ys_prev):
                    status = "infeasible"
                    iterations = it
                    break
                ys_prev = ys.copy()
            if s.adaptive_rho and it % s.rho_update_every == 0:
                ratio = np.sqrt(
                    (r_pri / max(pri_norm, 1e-30)) / max(r_dua / max(dua_norm, 1e-30), 1e-30)
                )
                rho_new = min(max(self._rho_base * ratio, s.rho_min), s.rho_max)
                if (
                    rho_new > s.rho_update_threshold * self._rho_base
                    or rho_new < self._rho_base / s.rho_update_threshold
                ):
                    self._rho_base = rho_new
                    self._factorize(eq_mask)
                    rho = self._rho_vec

        self._x, self._zs, self._ys = x, zs, ys
        z = zs / self.d if self.m else zs
        y = self.d * ys
        polished = False
        if status == "optimal" and s.polish and self.m:
            pol = self._polish(q, l, u, x, y, r_pri, r_dua)
            if pol is not None:
                x, z, y, r_pri, r_dua = pol
                polished = True
        return QpSolution(
            x=x,
            z=z,
            y=y,
            status=status,
            iterations=iterations,
            primal_res=r_pri,
            dual_res=r_dua,
            polished=polished,
            residual_history=history,
        )

    def _residuals(self, q, x, zs, ys):
        s = self.settings
        ax = self.A @ x
        z = zs / self.d if self.m else zs
        y = self.d * ys
        px = self.P @ x
        aty = self.A.T @ y if self.m else np.zeros(self.n)
        r_pri = float(np.max(np.abs(ax - z))) if self.m else 0.0
        r_dua = float(np.max(np.abs(px + q + aty)))
        pri_norm = max(
            float(np.max(np.abs(ax))) if self.m else 0.0,
            float(np.max(np.abs(z))) if self.m else 0.0,
        )
        dua_norm = max(
            float(np.max(np.abs(px))),
            float(np.max(np.abs(aty))),
            float(np.max(np.abs(q))) if q.size else 0.0,
        )
        eps_pri = s.eps_abs + s.eps_rel * pri_norm
        eps_dua = s.eps_abs + s.eps_rel * dua_norm
        return r_pri, r_dua, eps_pri, eps_dua, pri_norm, dua_norm

    def _primal_infeasible(self, l, u, dys) -> bool:
        """Certificate check: v with A'v = 0 and support(v) < 0 separates."""
        v = self.d * dys
        vnorm = float(np.max(np.abs(v))) if v.size else 0.0
        if vnorm <= 1e-15:
            return False
        v = v / vnorm
        eps = self.settings.eps_infeasible
        if float(np.max(np.abs(self.A.T @ v))) > eps:
            return False
        vp = np.maximum(v, 0.0)
        vm = np.minimum(v, 0.0)
        if np.any((vp > eps) & ~np.isfinite(u)) or np.any((vm < -eps) & ~np.isfinite(l)):
            return False
        support = float(np.sum(u[vp > 0] * vp[vp > 0])) + float(
            np.sum(l[vm < 0] * vm[vm < 0])
        )
        return support < -eps

    def _polish(self, q, l, u, x, y, r_pri, r_dua):
        """Active-set refinement of a converged iterate.

        Solves the equality-constrained KKT system on the active rows with
        tiny regularization plus iterative refinement; accepted only when
        it does not worsen either residual.
        """
        s = self.settings
        ytol = 1e-8 * max(1.0, float(np.max(np.abs(y))))
        eq = l == u
        act_low = (y < -ytol) & ~eq
        act_up = (y > ytol) & ~eq
        active = eq | act_low | act_up
        if not np.any(active):
            # unconstrained stationary point
            try:
                x_pol = np.linalg.solve(self.P, -q)
            except np.linalg.LinAlgError:
                return None
            y_pol = np.zeros(self.m)
            return self._accept_polish(q, l, u, x_pol, y_pol, r_pri, r_dua)
        a_act = self.A[active]
        b_act = np.where(act_up[active], u[active], l[active])
        k = a_act.shape[0]
        kkt = np.zeros((self.n + k, self.n + k))
        kkt[: self.n, : self.n] = self.P + s.polish_delta * np.eye(self.n)
        kkt[: self.n, self.n :] = a_act.T
        kkt[self.n :, : self.n] = a_act
        kkt[self.n :, self.n :] = -s.polish_delta * np.eye(k)
        rhs = np.concatenate([-q, b_act])
        try:
            factor = scipy.linalg.lu_factor(kkt)
        except (scipy.linalg.LinAlgError, ValueError):
            return None
        t = scipy.linalg.lu_solve(factor, rhs)
        for _ in range(3):  # refine against the unregularized system
            resid = rhs - np.concatenate(
                [
                    self.P @ t[: self.n] + a_act.T @ t[self.n :],
                    a_act @ t[: self.n],
                ]
            )
            t = t + scipy.linalg.lu_solve(factor, resid)
        if not np.all(np.isfinite(t)):
            return None
        x_pol = t[: self.n]
        y_pol = np.zeros(self.m)
        y_pol[active] = t[self.n :]
        return self._accept_polish(q, l, u, x_pol, y_pol, r_pri, r_dua)

    def _accept_polish(self, q, l, u, x_pol, y_pol, r_pri, r_dua):
        ax = self.A @ x_pol
        viol = np.maximum(ax - u, 0.0) + np.maximum(l - ax, 0.0)
        p_pri = float(np.max(viol)) if self.m else 0.0
        p_dua = float(np.max(np.abs(self.P @ x_pol + q + self.A.T @ y_pol)))
        if p_pri <= r_pri + 1e-12 and p_dua <= r_dua + 1e-12:
            return x_pol, ax, y_pol, p_pri, p_dua
        return None


def solve_qp(prob: QpProblem, settings: Settings | None = None, **kwargs) -> QpSolution:
    """One-shot solve of a QpProblem."""
    solver = QpSolver(prob.P, prob.A, settings)
    return solver.solve(prob.q, prob.l, prob.u, warm=False, **kwargs)


def project_box(x, l, u) -> np.ndarray:
    """Componentwise median(l, x, u)."""
    x = np.asarray(x, dtype=float)
    l = np.asarray(l, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(l > u):
        raise ValueError("requires l <= u componentwise")
    return np.minimum(np.maximum(x, l), u)


def kkt_residuals(prob: QpProblem, sol: QpSolution) -> dict:
    """Max-norm residuals of the three KKT blocks, solver-independent.

    - stationarity: ||P x + q + A' y||_inf
    - feasibility:  worst box violation of A x
    - comp_slack:   worst |dual| * |distance to the bound it claims active|;
      a nonzero dual paired with an infinite bound reads as inf.
    """
    x, y = sol.x, sol.y
    ax = prob.A @ x
    stat = float(np.max(np.abs(prob.P @ x + prob.q + prob.A.T @ y)))
    if prob.m:
        viol = np.maximum(ax - prob.u, 0.0) + np.maximum(prob.l - ax, 0.0)
        feas = float(np.max(viol))
        low_gap = np.where(np.isfinite(prob.l), np.abs(ax - prob.l), INF)
        up_gap = np.where(np.isfinite(prob.u), np.abs(prob.u - ax), INF)
        comp_terms = np.maximum(-y, 0.0) * low_gap + np.maximum(y, 0.0) * up_gap
        comp_terms = np.where(
            (y == 0.0), 0.0, comp_terms
        )
        comp = float(np.max(comp_terms))
    else:
        feas = 0.0
        comp = 0.0
    return {"stationarity": stat, "feasibility": feas, "comp_slack": comp}


def dump_problem(prob: QpProblem, fh) -> None:
    """Write a line-oriented text dump of a problem for offline inspection.

    Format (one record per line, 17 significant digits)::

        qp <n> <m>
        P <i> <j> <value>     # nonzeros of P, row-major
        q <i> <value>         # nonzeros of q
        A <i> <j> <value>     # nonzeros of A, row-major
        b <i> <l> <u>         # every constraint row; infinities spelled inf
        end
    """

    def fmt(v: float) -> str:
        if v == INF:
            return "inf"
        if v == -INF:
            return "-inf"
        return format(v, ".17g")

    fh.write(f"qp {prob.n} {prob.m}\n")
    for i in range(prob.n):
        for j in range(prob.n):
            if prob.P[i, j] != 0.0:
                fh.write(f"P {i} {j} {fmt(prob.P[i, j])}\n")
    for i in range(prob.n):
        if prob.q[i] != 0.0:
            fh.write(f"q {i} {fmt(prob.q[i])}\n")
    for i in range(prob.m):
        for j in range(prob.n):
            if prob.A[i, j] != 0.0:
                fh.write(f"A {i} {j} {fmt(prob.A[i, j])}\n")
    for i in range(prob.m):
        fh.write(f"b {i} {fmt(prob.l[i])} {fmt(prob.u[i])}\n")
    fh.write("end\n")
