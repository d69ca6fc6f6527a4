"""Classical quadratic-cost economic dispatch.

All unclamped units run at a common incremental cost dC/dp = 2 a p + b;
units whose share leaves their box sit at the binding bound. Solved by
bisection on the incremental cost with a final exact share among interior
units, so the demand balance holds to the last bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadCost:
    """C(p) = a p^2 + b p + c with a > 0."""

    a: float
    b: float
    c: float = 0.0

    def __post_init__(self):
        if not self.a > 0.0:
            raise ValueError("quadratic cost requires a > 0")

    def value(self, p: float) -> float:
        return self.a * p * p + self.b * p + self.c

    def incremental(self, p: float) -> float:
        return 2.0 * self.a * p + self.b


class InfeasibleDispatch(ValueError):
    pass


def economic_dispatch(
    costs: list[QuadCost], bounds: list[tuple[float, float]], p_l: float
) -> np.ndarray:
    """Allocate p_l across units minimizing total quadratic cost.

    Bisection runs on the shared incremental cost lambda over the range it
    can take at the box corners; each unit contributes
    clip((lambda - b)/(2a), p_min, p_max). Afterwards the interior set is
    re-solved in closed form so that sum(p) == p_l exactly.
    """
    n = len(costs)
    if n == 0 or len(bounds) != n:
        raise ValueError("costs and bounds must be nonempty and equal length")
    a = np.array([c.a for c in costs])
    b = np.array([c.b for c in costs])
    lo = np.array([bd[0] for bd in bounds], dtype=float)
    hi = np.array([bd[1] for bd in bounds], dtype=float)
    if np.any(lo > hi):
        raise ValueError("requires p_min <= p_max for every unit")
    if p_l < lo.sum() - 1e-9 or p_l > hi.sum() + 1e-9:
        raise InfeasibleDispatch(
            f"demand {p_l:g} outside aggregate capability [{lo.sum():g}, {hi.sum():g}]"
        )

    def shares(lam: float) -> np.ndarray:
        return np.clip((lam - b) / (2.0 * a), lo, hi)

    lam_lo = float(np.min(2.0 * a * lo + b))
    lam_hi = float(np.max(2.0 * a * hi + b))
    for _ in range(200):
        lam = 0.5 * (lam_lo + lam_hi)
        if shares(lam).sum() < p_l:
            lam_lo = lam
        else:
            lam_hi = lam
        if lam_hi - lam_lo <= 1e-9 * max(1.0, abs(lam_hi)):
            break
    lam = 0.5 * (lam_lo + lam_hi)
    p = shares(lam)

    # Exact share among interior units: lambda solves
    # sum_int (lambda - b_i)/(2 a_i) = p_l - sum_clamped p_bound.
    interior = (p > lo + 1e-12) & (p < hi - 1e-12)
    if np.any(interior):
        w = 1.0 / (2.0 * a[interior])
        rest = p_l - p[~interior].sum()
        lam_exact = (rest + float((b[interior] * w).sum())) / float(w.sum())
        p = p.copy()
        p[interior] = np.clip((lam_exact - b[interior]) * w, lo[interior], hi[interior])
        # distribute any residual rounding onto the largest interior unit
        idx = np.flatnonzero(interior)
        p[idx[0]] += p_l - p.sum()
    return p


def incremental_costs(costs: list[QuadCost], p: np.ndarray) -> np.ndarray:
    return np.array([c.incremental(pi) for c, pi in zip(costs, p)])
