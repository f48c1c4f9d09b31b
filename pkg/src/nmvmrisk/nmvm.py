"""Normal mean-variance mixture laws with linear mean ``mu + Theta * gamma``.

Given ``Theta = t`` a univariate law is ``N(mu + t gamma, t sigma2)``; the
multivariate law is ``N(mu + t gamma, t Sigma)``. Scalar distribution
functions are mixtures of Gaussian ones, evaluated by the mixing model's
``expect`` (log-axis adaptive quadrature for continuous mixing laws).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import DegenerateAggregate, DomainError, ModelValidationError, MomentNotFinite, TailUnderflow
from .mixing import Degenerate, MixingModel
from .special import norm_pdf, norm_ppf, norm_sf

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
QUANTILE_XTOL = 1e-12
HAZARD_FLOOR = 1e-300


@dataclass(frozen=True)
class UnivariateNMVM:
    """Scalar NMVM law ``mu + Theta gamma + sqrt(Theta sigma2) Z``."""

    mu: float
    gamma: float
    sigma2: float
    mixing: MixingModel

    def __post_init__(self):
        for name in ("mu", "gamma", "sigma2"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ModelValidationError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.sigma2 <= 0:
            raise ModelValidationError(f"sigma2 must be positive, got {self.sigma2!r}")

    def tilted(self, l: int) -> "UnivariateNMVM":
        """Same location, skew and scale, with mixing density tilted by ``t^l``."""
        if l == 0:
            return self
        return UnivariateNMVM(self.mu, self.gamma, self.sigma2, self.mixing.tilt(l))

    def shifted(self, delta: float) -> "UnivariateNMVM":
        return UnivariateNMVM(self.mu + delta, self.gamma, self.sigma2, self.mixing)

    def _standardise(self, s: float, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        scale = np.sqrt(theta * self.sigma2)
        return (s - self.mu - theta * self.gamma) / scale, scale

    def density(self, s: float) -> float:
        """``f_S(s)``."""
        def f(theta):
            x, scale = self._standardise(s, theta)
            return norm_pdf(x) / scale

        return max(float(self.mixing.expect(f)), 0.0)

    def survival(self, s: float) -> float:
        """``P(S > s)``."""
        def f(theta):
            x, _ = self._standardise(s, theta)
            return norm_sf(x)

        return min(max(float(self.mixing.expect(f)), 0.0), 1.0)

    def cdf(self, s: float) -> float:
        return 1.0 - self.survival(s)

    def survival_and_density(self, s: float) -> tuple[float, float]:
        """``(P(S > s), f_S(s))`` from one shared quadrature."""
        def f(theta):
            x, scale = self._standardise(s, theta)
            return np.stack([norm_sf(x), norm_pdf(x) / scale])

        sf, pdf = self.mixing.expect(f)
        return min(max(float(sf), 0.0), 1.0), max(float(pdf), 0.0)

    def hazard(self, s: float) -> float:
        """``f_S(s) / P(S > s)``; raises :class:`TailUnderflow` when the survival underflows."""
        sf, pdf = self.survival_and_density(s)
        if sf <= HAZARD_FLOOR:
            raise TailUnderflow(f"survival at s={s!r} is {sf!r}, below {HAZARD_FLOOR:g}")
        return pdf / sf

    def quantile(self, alpha: float) -> float:
        """``inf{s : P(S <= s) >= alpha}``, found by bracketing and Brent's method."""
        alpha = float(alpha)
        if not 0.0 < alpha < 1.0:
            raise DomainError(f"alpha must lie strictly inside (0, 1), got {alpha!r}")
        if isinstance(self.mixing, Degenerate):
            t = self.mixing.theta0
            return self.mu + t * self.gamma + math.sqrt(t * self.sigma2) * float(norm_ppf(alpha))

        target = 1.0 - alpha

        def excess(s: float) -> float:
            return self.survival(s) - target

        lo, hi = self._bracket(excess)
        root = optimize.brentq(excess, lo, hi, xtol=QUANTILE_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)
        return float(root)

    def _bracket(self, excess) -> tuple[float, float]:
        try:
            c1 = self.mixing.moment(1)
            centre = self.mu + c1 * self.gamma
            radius = 10.0 * math.sqrt(c1 * self.sigma2)
            if self.mixing.max_finite_moment >= 2:
                var = c1 * self.sigma2 + (self.mixing.moment(2) - c1 * c1) * self.gamma ** 2
                radius = max(radius, 10.0 * math.sqrt(max(var, 0.0)))
        except MomentNotFinite:
            centre, radius = self.mu, math.sqrt(self.sigma2)

        lo, hi = centre - radius, centre + radius
        for _ in range(60):
            f_lo, f_hi = excess(lo), excess(hi)
            if f_lo > 0 and f_hi < 0:
                return lo, hi
            if f_lo <= 0:
                lo = centre - 2.0 * (centre - lo)
            if f_hi >= 0:
                hi = centre + 2.0 * (hi - centre)
        raise DomainError("failed to bracket the quantile after 60 expansions")


@dataclass(frozen=True)
class MultivariateNMVM:
    """Vector NMVM law ``mu + Theta gamma + sqrt(Theta) A Z`` with ``Sigma = A A'``."""

    mu: np.ndarray
    gamma: np.ndarray
    sigma: np.ndarray
    mixing: MixingModel
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        gamma = np.array(self.gamma, dtype=float).reshape(-1)
        sigma = np.array(self.sigma, dtype=float)
        n = mu.size
        if n == 0:
            raise ModelValidationError("dimension must be at least 1")
        if gamma.shape != (n,):
            raise ModelValidationError(f"gamma has length {gamma.size}, expected {n}")
        if sigma.shape != (n, n):
            raise ModelValidationError(f"sigma has shape {sigma.shape}, expected ({n}, {n})")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(gamma)) and np.all(np.isfinite(sigma))):
            raise ModelValidationError("mu, gamma and sigma must be finite")
        asym = float(np.max(np.abs(sigma - sigma.T)))
        if asym > SYMMETRY_TOL:
            i, j = np.unravel_index(np.argmax(np.abs(sigma - sigma.T)), sigma.shape)
            raise ModelValidationError(
                f"sigma is not symmetric: |sigma[{i}][{j}] - sigma[{j}][{i}]| = {asym:.3g} > {SYMMETRY_TOL:g}"
            )
        sigma = 0.5 * (sigma + sigma.T)
        norm = float(np.linalg.norm(sigma, 2))
        min_eig = float(np.linalg.eigvalsh(sigma)[0]) if norm > 0 else 0.0
        if min_eig < -PSD_TOL * norm:
            raise ModelValidationError(
                f"sigma is not positive semi-definite: smallest eigenvalue {min_eig:.3g} "
                f"< -{PSD_TOL:g} * ||sigma||"
            )
        labels = tuple(self.labels) if self.labels else tuple(f"X{i + 1}" for i in range(n))
        if len(labels) != n:
            raise ModelValidationError(f"labels has length {len(labels)}, expected {n}")
        for arr in (mu, gamma, sigma):
            arr.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "labels", labels)

    @property
    def dimension(self) -> int:
        return self.mu.size

    @property
    def sigma_row_sums(self) -> np.ndarray:
        """``sigma_iS = sum_j sigma_ij``."""
        return self.sigma.sum(axis=1)

    @property
    def sigma_total(self) -> float:
        """``sigma_S^2 = sum_ij sigma_ij``."""
        return float(self.sigma.sum())

    def aggregate(self, weights: Sequence[float] | None = None) -> UnivariateNMVM:
        """Law of ``w' X`` (the plain sum when ``weights`` is None)."""
        w = self._weights(weights)
        s2 = float(w @ self.sigma @ w)
        if not s2 > 0:
            raise DegenerateAggregate(f"w' Sigma w = {s2!r} is not positive")
        return UnivariateNMVM(float(w @ self.mu), float(w @ self.gamma), s2, self.mixing)

    def reweight(self, weights: Sequence[float]) -> "MultivariateNMVM":
        """Law of ``(w_1 X_1, ..., w_n X_n)``."""
        w = self._weights(weights)
        return MultivariateNMVM(w * self.mu, w * self.gamma, np.outer(w, w) * self.sigma, self.mixing, self.labels)

    def permute(self, order: Sequence[int]) -> "MultivariateNMVM":
        idx = np.asarray(order, dtype=int)
        return MultivariateNMVM(
            self.mu[idx], self.gamma[idx], self.sigma[np.ix_(idx, idx)], self.mixing,
            tuple(self.labels[i] for i in idx),
        )

    def marginal(self, i: int) -> UnivariateNMVM:
        return UnivariateNMVM(float(self.mu[i]), float(self.gamma[i]), float(self.sigma[i, i]), self.mixing)

    def _weights(self, weights) -> np.ndarray:
        if weights is None:
            return np.ones(self.dimension)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape != (self.dimension,):
            raise ModelValidationError(f"weights has length {w.size}, expected {self.dimension}")
        if not np.all(np.isfinite(w)):
            raise ModelValidationError("weights must be finite")
        return w


def aggregate(model: MultivariateNMVM, weights: Sequence[float] | None = None) -> UnivariateNMVM:
    return model.aggregate(weights)


def reweight(model: MultivariateNMVM, weights: Sequence[float]) -> MultivariateNMVM:
    return model.reweight(weights)
