"""Tail moments and tail central moments of a univariate NMVM law.

For a law ``S`` and level ``alpha`` let ``s_alpha`` be its quantile and let
``S^(l)`` be the law with the same ``mu, gamma, sigma2`` whose mixing density
is tilted by ``t^l``. Every level is conditioned on the *same* threshold
``s_alpha``. Writing ``c_l = E[Theta^l]``, ``p_l = P(S^(l) > s_alpha)`` and
``h_l`` for the hazard of ``S^(l)`` at ``s_alpha``, the conditional moments
``T[l][k] = E[(S^(l))^k | S^(l) > s_alpha]`` satisfy

    T[l][k] = mu T[l][k-1]
              + r_l (sigma2 s_alpha^(k-1) h_(l+1) + gamma T[l+1][k-1] + (k-1) sigma2 T[l+1][k-2])

with ``r_l = c_(l+1) p_(l+1) / (c_l p_l)`` and ``T[l][0] = 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property


from .errors import DomainError, NumericalWarning, TailUnderflow
from .nmvm import HAZARD_FLOOR, UnivariateNMVM
from .special import norm_pdf, norm_sf

MAX_ORDER = 8
CONDITION_WARN = 1e12


@dataclass(frozen=True)
class TiltLadder:
    """Per-level mixing moments, tail masses and hazards at a common threshold."""

    alpha: float
    s_alpha: float
    moments: tuple[float, ...]
    tail_masses: tuple[float, ...]
    hazards: tuple[float, ...]

    @property
    def max_level(self) -> int:
        return len(self.moments) - 1

    def tail_factor(self, l: int) -> float:
        """``c_l p_l / (1 - alpha)``; for ``l = 1`` this is ``c* (1 - alpha*) / (1 - alpha)``."""
        return self.moments[l] * self.tail_masses[l] / (1.0 - self.alpha)


def build_ladder(
    model: UnivariateNMVM,
    alpha: float,
    max_level: int,
    *,
    s_alpha: float | None = None,
) -> TiltLadder:
    """Evaluate ``c_l``, ``P(S^(l) > s_alpha)`` and the hazard of ``S^(l)`` for ``l = 0..max_level``.

    Level 0 uses ``1 - alpha`` as its tail mass, which is exact at the quantile.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie strictly inside (0, 1), got {alpha!r}")
    if max_level < 0:
        raise ValueError("max_level must be non-negative")
    model.mixing.check_moment(max_level)
    if s_alpha is None:
        s_alpha = model.quantile(alpha)

    moments, masses, hazards = [], [], []
    for l in range(max_level + 1):
        level_model = model.tilted(l)
        sf, pdf = level_model.survival_and_density(s_alpha)
        if sf <= HAZARD_FLOOR:
            raise TailUnderflow(f"tail mass of tilt level {l} at s_alpha={s_alpha!r} underflowed ({sf!r})")
        moments.append(model.mixing.moment(l))
        masses.append(1.0 - alpha if l == 0 else sf)
        hazards.append(pdf / sf)
    return TiltLadder(alpha, float(s_alpha), tuple(moments), tuple(masses), tuple(hazards))


def _binomial_sum(terms: list[float], what: str) -> float:
    value = math.fsum(terms)
    magnitude = math.fsum(abs(t) for t in terms)
    if magnitude > 0 and (value == 0.0 or magnitude / abs(value) > CONDITION_WARN):
        warnings.warn(
            f"{what}: binomial expansion cancels heavily "
            f"(sum |terms| / |result| = {magnitude / abs(value) if value else math.inf:.3g})",
            NumericalWarning,
            stacklevel=3,
        )
    return value


class TMTable:
    """Triangular table ``T[l][k]`` for ``l = 0..K`` and ``k = 0..K-l``.

    Parameters
    ----------
    model : UnivariateNMVM
        Law of the aggregate ``S``.
    alpha : float
        Confidence level in (0, 1).
    max_order : int
        Highest moment order ``K`` required at level 0.
    ladder : TiltLadder, optional
        A ladder with at least ``max_order`` levels for the same model and alpha.
    order_limit : int
        Guard against orders where the recursion is unvalidated.
    """

    def __init__(
        self,
        model: UnivariateNMVM,
        alpha: float,
        max_order: int,
        *,
        ladder: TiltLadder | None = None,
        order_limit: int = MAX_ORDER,
    ):
        if max_order < 1:
            raise ValueError("max_order must be at least 1")
        if max_order > order_limit:
            raise DomainError(f"order {max_order} exceeds the supported ceiling {order_limit}")
        if ladder is None or ladder.max_level < max_order:
            ladder = build_ladder(
                model, alpha, max_order, s_alpha=None if ladder is None else ladder.s_alpha
            )
        self.model = model
        self.alpha = float(alpha)
        self.max_order = max_order
        self.ladder = ladder
        self._entries = self._fill()

    def _fill(self) -> list[list[float]]:
        K = self.max_order
        mu, gamma, s2 = self.model.mu, self.model.gamma, self.model.sigma2
        lad = self.ladder
        s = lad.s_alpha
        table: list[list[float]] = [[] for _ in range(K + 1)]
        table[K] = [1.0]
        for l in range(K - 1, -1, -1):
            r = (lad.moments[l + 1] * lad.tail_masses[l + 1]) / (lad.moments[l] * lad.tail_masses[l])
            h = lad.hazards[l + 1]
            nxt = table[l + 1]
            row = [1.0]
            for k in range(1, K - l + 1):
                inner = s2 * s ** (k - 1) * h + gamma * nxt[k - 1]
                if k >= 2:
                    inner += (k - 1) * s2 * nxt[k - 2]
                row.append(mu * row[k - 1] + r * inner)
            table[l] = row
        return table

    @property
    def s_alpha(self) -> float:
        return self.ladder.s_alpha

    def tm(self, k: int, level: int = 0) -> float:
        """``E[(S^(level))^k | S^(level) > s_alpha]``."""
        if not 0 <= level <= self.max_order or not 0 <= k <= self.max_order - level:
            raise DomainError(f"T[{level}][{k}] is outside the table of order {self.max_order}")
        return self._entries[level][k]

    def row(self, level: int = 0) -> tuple[float, ...]:
        return tuple(self._entries[level])

    @cached_property
    def cte(self) -> float:
        return self.tm(1)

    def shifted_power(self, level: int, shift: float, k: int) -> float:
        """``E[(S^(level) - shift)^k | S^(level) > s_alpha]`` by binomial expansion."""
        if k == 0:
            return 1.0
        if k == 1:
            return self.tm(1, level) - shift
        terms = [math.comb(k, j) * self.tm(k - j, level) * (-shift) ** j for j in range(k + 1)]
        return _binomial_sum(terms, f"E[(S^({level}) - {shift:.6g})^{k} | tail]")

    def tcm(self, k: int) -> float:
        """``E[(S - CTE)^k | S > s_alpha]``."""
        if k < 1:
            raise ValueError("TCM order must be at least 1")
        return self.shifted_power(0, self.cte, k)


def tail_moment_table(model: UnivariateNMVM, alpha: float, max_order: int, **kwargs) -> TMTable:
    return TMTable(model, alpha, max_order, **kwargs)


def tail_central_moment(model: UnivariateNMVM, alpha: float, k: int) -> float:
    return TMTable(model, alpha, max(k, 1)).tcm(k)


def shifted_tail_power(model: UnivariateNMVM, alpha: float, level: int, shift: float, k: int) -> float:
    return TMTable(model, alpha, max(level + k, 1)).shifted_power(level, shift, k)


def cte_closed_form(model: UnivariateNMVM, alpha: float, ladder: TiltLadder | None = None) -> float:
    """``mu + c* (1 - alpha*) / (1 - alpha) (gamma + sigma2 h_{S*}(s_alpha))``."""
    if ladder is None:
        ladder = build_ladder(model, alpha, 1)
    return model.mu + ladder.tail_factor(1) * (model.gamma + model.sigma2 * ladder.hazards[1])


def tm2_tv_closed_form(
    model: UnivariateNMVM, alpha: float, ladder: TiltLadder | None = None
) -> tuple[float, float]:
    """Second tail moment and tail variance written out in ``c*, c**, alpha*, alpha**``."""
    if ladder is None:
        ladder = build_ladder(model, alpha, 2)
    mu, gamma, s2, s = model.mu, model.gamma, model.sigma2, ladder.s_alpha
    f1, f2 = ladder.tail_factor(1), ladder.tail_factor(2)
    h1, h2 = ladder.hazards[1], ladder.hazards[2]
    tm2 = (
        mu ** 2
        + f1 * (s2 + 2 * mu * gamma + s2 * (s + mu) * h1)
        + f2 * (gamma ** 2 + gamma * s2 * h2)
    )
    tv = (
        f1 * s2 * (1 + (s - mu) * h1)
        + f2 * gamma * (gamma + s2 * h2)
        - (f1 * (gamma + s2 * h1)) ** 2
    )
    return tm2, tv


def gaussian_tail_moments(mean: float, var: float, threshold: float, max_order: int) -> list[float]:
    """``E[X^k | X > threshold]`` for ``X ~ N(mean, var)``, ``k = 0..max_order``, by the normal recursion."""
    sd = math.sqrt(var)
    x = (threshold - mean) / sd
    sf = float(norm_sf(x))
    if sf <= HAZARD_FLOOR:
        raise TailUnderflow(f"normal survival at {threshold!r} underflowed ({sf!r})")
    hazard = float(norm_pdf(x)) / (sd * sf)
    out = [1.0]
    for k in range(1, max_order + 1):
        val = var * threshold ** (k - 1) * hazard + mean * out[k - 1]
        if k >= 2:
            val += (k - 1) * var * out[k - 2]
        out.append(val)
    return out


__all__ = [
    "MAX_ORDER",
    "TMTable",
    "TiltLadder",
    "build_ladder",
    "cte_closed_form",
    "gaussian_tail_moments",
    "shifted_tail_power",
    "tail_central_moment",
    "tail_moment_table",
    "tm2_tv_closed_form",
]
