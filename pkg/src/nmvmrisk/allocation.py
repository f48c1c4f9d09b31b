"""Capital allocation for multivariate NMVM portfolios.

All methods share the regression coefficients of ``X_i`` on ``(S, Theta)``
given ``Theta``::

    a1_i = sigma_iS / sigma_S^2
    a0_i = mu_i    - a1_i * sum_j mu_j
    a2_i = gamma_i - a1_i * sum_j gamma_j

and one :class:`~nmvmrisk.tail_moments.TMTable` per confidence level for the
aggregate ``S = X_1 + ... + X_n``. Capitals may be negative; proportions are
NaN when the total is exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateAggregate, NonPositiveTCM
from .nmvm import MultivariateNMVM
from .tail_moments import MAX_ORDER, TMTable

METHODS = ("cte", "tv", "tcm", "combined", "euler_rooted")

# (m2, m3) ranges used for the combined CTE + p TV + q TCM_3 reserve study
COMBINED_PRESET_P = (0.0, 3.0)
COMBINED_PRESET_Q = (0.0, 0.005)


@dataclass(frozen=True)
class AllocationCoefficients:
    a0: np.ndarray
    a1: np.ndarray
    a2: np.ndarray


@dataclass(frozen=True)
class AllocationReport:
    method: str
    alpha: float
    total: float
    capitals: np.ndarray
    labels: tuple[str, ...]
    order: int | None = None
    mix: tuple[float, float, float] | None = None

    @property
    def proportions(self) -> np.ndarray:
        if self.total == 0.0:
            return np.full(self.capitals.shape, np.nan)
        return self.capitals / self.total

    @property
    def allocation_gap(self) -> float:
        """``|sum_i K_i - K|``."""
        return abs(math.fsum(self.capitals) - self.total)


def coefficients(model: MultivariateNMVM) -> AllocationCoefficients:
    s2 = model.sigma_total
    if not s2 > 0:
        raise DegenerateAggregate(f"sigma_S^2 = {s2!r} is not positive")
    a1 = model.sigma_row_sums / s2
    a0 = model.mu - a1 * math.fsum(model.mu)
    a2 = model.gamma - a1 * math.fsum(model.gamma)
    return AllocationCoefficients(a0, a1, a2)


class CapitalAllocator:
    """Allocation engine for one portfolio; caches one table per confidence level.

    >>> alloc = CapitalAllocator(model)            # doctest: +SKIP
    >>> alloc.cte(0.95).capitals                   # doctest: +SKIP
    """

    def __init__(self, model: MultivariateNMVM, *, order_limit: int = MAX_ORDER):
        self.model = model
        self.aggregate = model.aggregate()
        self.coef = coefficients(model)
        self.order_limit = order_limit
        self._tables: dict[float, TMTable] = {}

    def table(self, alpha: float, order: int) -> TMTable:
        alpha = float(alpha)
        cached = self._tables.get(alpha)
        if cached is not None and cached.max_order >= order:
            return cached
        tab = TMTable(
            self.aggregate,
            alpha,
            order,
            ladder=None if cached is None else cached.ladder,
            order_limit=self.order_limit,
        )
        self._tables[alpha] = tab
        return tab

    def _report(self, method, alpha, total, capitals, order=None, mix=None) -> AllocationReport:
        capitals = np.asarray(capitals, dtype=float)
        capitals.setflags(write=False)
        return AllocationReport(method, float(alpha), float(total), capitals, self.model.labels, order, mix)

    # single-method allocations -------------------------------------------

    def cte(self, alpha: float) -> AllocationReport:
        """``K_i = E[X_i | S > s_alpha]``."""
        tab = self.table(alpha, 1)
        c = self.coef
        capitals = c.a0 + c.a1 * tab.cte + c.a2 * tab.ladder.tail_factor(1)
        return self._report("cte", alpha, tab.cte, capitals, order=1)

    def tail_cov_power(self, i: int, alpha: float, k: int) -> float:
        """``Cov(X_i, S^(k-1) | S > s_alpha)`` for ``k >= 2``."""
        if k < 2:
            raise ValueError("k must be at least 2")
        tab = self.table(alpha, k)
        c = self.coef
        return c.a1[i] * (tab.tm(k) - tab.cte * tab.tm(k - 1)) + c.a2[i] * tab.ladder.tail_factor(1) * (
            tab.tm(k - 1, level=1) - tab.tm(k - 1)
        )

    def tcm(self, alpha: float, k: int) -> AllocationReport:
        """``K = TCM_k(S)``, ``K_i = Cov(X_i, (S - CTE)^(k-1) | S > s_alpha)``."""
        if k < 2:
            raise ValueError("TCM allocation needs k >= 2")
        tab = self.table(alpha, k)
        c = self.coef
        total = tab.tcm(k)
        gap = tab.shifted_power(1, tab.cte, k - 1) - tab.tcm(k - 1)
        capitals = c.a1 * total + c.a2 * tab.ladder.tail_factor(1) * gap
        return self._report("tcm", alpha, total, capitals, order=k)

    def tv(self, alpha: float) -> AllocationReport:
        """``K = TV(S)``, ``K_i = Cov(X_i, S | S > s_alpha)``."""
        tab = self.table(alpha, 2)
        c = self.coef
        total = tab.tcm(2)
        capitals = c.a1 * total + tab.ladder.tail_factor(1) * c.a2 * (tab.tm(1, level=1) - tab.cte)
        return self._report("tv", alpha, total, capitals, order=2)

    def combined(self, alpha: float, m1: float = 1.0, m2: float = 0.0, m3: float = 0.0) -> AllocationReport:
        """``m1 CTE + m2 TV + m3 TCM_3`` and the matching linear combination of capitals."""
        for name, m in (("m1", m1), ("m2", m2), ("m3", m3)):
            if not (math.isfinite(m) and m >= 0):
                raise ValueError(f"{name} must be a non-negative real, got {m!r}")
        parts = [(m1, self.cte(alpha))]
        if m2:
            parts.append((m2, self.tv(alpha)))
        if m3:
            parts.append((m3, self.tcm(alpha, 3)))
        total = math.fsum(m * r.total for m, r in parts)
        capitals = sum(m * r.capitals for m, r in parts)
        return self._report("combined", alpha, total, capitals, mix=(float(m1), float(m2), float(m3)))

    def euler_rooted(self, alpha: float, k: int) -> AllocationReport:
        """``K = TCM_k^(1/k)``, ``K_i = Cov(X_i, (S - CTE)^(k-1) | tail) / TCM_k^(1 - 1/k)``."""
        base = self.tcm(alpha, k)
        if not base.total > 0:
            raise NonPositiveTCM(f"TCM_{k} at alpha={alpha} is {base.total!r}; cannot take the k-th root")
        scale = base.total ** (1.0 - 1.0 / k)
        return self._report("euler_rooted", alpha, base.total ** (1.0 / k), base.capitals / scale, order=k)

    def allocate(self, method: str, alpha: float, *, k: int = 3, m1=1.0, m2=0.0, m3=0.0) -> AllocationReport:
        if method == "cte":
            return self.cte(alpha)
        if method == "tv":
            return self.tv(alpha)
        if method == "tcm":
            return self.tcm(alpha, k)
        if method == "euler_rooted":
            return self.euler_rooted(alpha, k)
        if method == "combined":
            return self.combined(alpha, m1, m2, m3)
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")

    # second-order tail quantities ------------------------------------------

    def cross_moment(self, i: int, j: int, alpha: float) -> float:
        """``E[X_i X_j | S > s_alpha]``."""
        tab = self.table(alpha, 2)
        a0, a1, a2 = self.coef.a0, self.coef.a1, self.coef.a2
        f1, f2 = tab.ladder.tail_factor(1), tab.ladder.tail_factor(2)
        s2 = self.model.sigma_total
        return (
            a1[i] * a1[j] * tab.tm(2)
            + (a1[i] * a0[j] + a0[i] * a1[j]) * tab.cte
            + (a1[i] * a2[j] + a2[i] * a1[j]) * f1 * tab.tm(1, level=1)
            + a0[i] * a0[j]
            + (a2[i] * a0[j] + a0[i] * a2[j] + self.model.sigma[i, j] - a1[i] * a1[j] * s2) * f1
            + a2[i] * a2[j] * f2
        )

    def combined_grid(
        self,
        alpha: float,
        p_values: Sequence[float] | None = None,
        q_values: Sequence[float] | None = None,
    ) -> list[AllocationReport]:
        """Combined allocations with ``m1 = 1`` over a (p, q) grid (default: the preset ranges)."""
        if p_values is None:
            p_values = np.linspace(*COMBINED_PRESET_P, 7)
        if q_values is None:
            q_values = np.linspace(*COMBINED_PRESET_Q, 6)
        return [self.combined(alpha, 1.0, float(p), float(q)) for p in p_values for q in q_values]


def cte_allocation(model: MultivariateNMVM, alpha: float) -> AllocationReport:
    return CapitalAllocator(model).cte(alpha)


def tv_allocation(model: MultivariateNMVM, alpha: float) -> AllocationReport:
    return CapitalAllocator(model).tv(alpha)


def tcm_allocation(model: MultivariateNMVM, alpha: float, k: int) -> AllocationReport:
    return CapitalAllocator(model).tcm(alpha, k)


def combined_allocation(model: MultivariateNMVM, alpha: float, m1: float, m2: float, m3: float) -> AllocationReport:
    return CapitalAllocator(model).combined(alpha, m1, m2, m3)


def euler_rooted_allocation(model: MultivariateNMVM, alpha: float, k: int) -> AllocationReport:
    return CapitalAllocator(model).euler_rooted(alpha, k)


def tail_cov_power(model: MultivariateNMVM, i: int, alpha: float, k: int) -> float:
    return CapitalAllocator(model).tail_cov_power(i, alpha, k)


def conditional_cross_moment(model: MultivariateNMVM, i: int, j: int, alpha: float) -> float:
    return CapitalAllocator(model).cross_moment(i, j, alpha)
