"""Mixing random variables Theta for normal mean-variance mixtures.

Three families are supported:

* :class:`GIG` -- generalised inverse Gaussian ``GIG(lam, chi, psi)`` with density
  ``(psi/chi)^(lam/2) / (2 K_lam(sqrt(chi psi))) * t^(lam-1) exp(-(chi/t + psi t)/2)``,
  including the Gamma (``chi = 0``) and inverse-Gamma (``psi = 0``) boundaries;
* :class:`Degenerate` -- a point mass at ``theta0`` (Gaussian laws);
* :class:`Tabulated` -- a user density frozen onto log-spaced quadrature nodes.

Every family exposes raw moments ``E[Theta^l]``, the size-biased ("tilted")
law with density ``t^l pi(t) / E[Theta^l]``, expectations of vectorised
functions of Theta, and sampling from an explicit numpy Generator.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import stats

from .errors import DomainError, ModelValidationError, MomentNotFinite
from .quadrature import adaptive_integrate
from .special import bessel_k_log

# nats below the peak of t * pi(t) at which the log-axis integration range is cut
_RANGE_DROP = 80.0
_LOG_THETA_MIN = -700.0
_LOG_THETA_MAX = 700.0


class MixingModel(ABC):
    """Abstract mixing law on (0, inf)."""

    @property
    @abstractmethod
    def max_finite_moment(self) -> float:
        """Largest integer ``l`` with ``E[Theta^l] < inf`` (``math.inf`` if all exist)."""

    def check_moment(self, l: int) -> None:
        if l < 0:
            raise ValueError(f"moment order must be non-negative, got {l}")
        if l > self.max_finite_moment:
            raise MomentNotFinite(
                f"E[Theta^{l}] is infinite for {self!r} "
                f"(largest finite moment is {self.max_finite_moment})"
            )

    @abstractmethod
    def moment(self, l: int) -> float:
        """Raw moment ``E[Theta^l]``."""

    @abstractmethod
    def tilt(self, l: int) -> "MixingModel":
        """Law with density ``t^l pi(t) / E[Theta^l]``."""

    @abstractmethod
    def expect(self, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """``E[func(Theta)]`` for a function vectorised over its last axis."""

    @abstractmethod
    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """``count`` i.i.d. draws using ``rng``."""


@dataclass(frozen=True)
class GIG(MixingModel):
    """Generalised inverse Gaussian law ``GIG(lam, chi, psi)``."""

    lam: float
    chi: float
    psi: float
    _log_norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lam, chi, psi = float(self.lam), float(self.chi), float(self.psi)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "psi", psi)
        if not all(math.isfinite(v) for v in (lam, chi, psi)) or chi < 0 or psi < 0:
            raise ModelValidationError(f"GIG parameters must be finite with chi, psi >= 0: {self!r}")
        valid = (
            (lam < 0 and chi > 0 and psi >= 0)
            or (lam == 0 and chi > 0 and psi > 0)
            or (lam > 0 and chi >= 0 and psi > 0)
        )
        if not valid:
            raise ModelValidationError(
                f"invalid GIG parameters lam={lam}, chi={chi}, psi={psi}: need chi > 0, psi >= 0 "
                "for lam < 0; chi, psi > 0 for lam = 0; chi >= 0, psi > 0 for lam > 0"
            )
        object.__setattr__(self, "_log_norm", self._compute_log_norm())

    @property
    def branch(self) -> str:
        if self.chi == 0.0:
            return "gamma"
        if self.psi == 0.0:
            return "inverse_gamma"
        return "bessel"

    def _compute_log_norm(self) -> float:
        lam, chi, psi = self.lam, self.chi, self.psi
        if self.branch == "gamma":
            return lam * math.log(psi / 2.0) - math.lgamma(lam)
        if self.branch == "inverse_gamma":
            a = -lam
            return a * math.log(chi / 2.0) - math.lgamma(a)
        return 0.5 * lam * math.log(psi / chi) - math.log(2.0) - bessel_k_log(lam, math.sqrt(chi * psi))

    @property
    def max_finite_moment(self) -> float:
        if self.psi > 0:
            return math.inf
        return math.ceil(-self.lam) - 1

    def moment(self, l: int) -> float:
        self.check_moment(l)
        if l == 0:
            return 1.0
        lam, chi, psi = self.lam, self.chi, self.psi
        if self.branch == "gamma":
            return math.exp(math.lgamma(lam + l) - math.lgamma(lam) + l * math.log(2.0 / psi))
        if self.branch == "inverse_gamma":
            a = -lam
            return math.exp(math.lgamma(a - l) - math.lgamma(a) + l * math.log(chi / 2.0))
        z = math.sqrt(chi * psi)
        return math.exp(0.5 * l * math.log(chi / psi) + bessel_k_log(lam + l, z) - bessel_k_log(lam, z))

    def tilt(self, l: int) -> "GIG":
        self.check_moment(l)
        if l == 0:
            return self
        return GIG(self.lam + l, self.chi, self.psi)

    def logpdf(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                self._log_norm
                + (self.lam - 1.0) * np.log(theta)
                - 0.5 * (self.chi / theta + self.psi * theta)
            )
        return np.where(theta > 0, out, -np.inf)

    def pdf(self, theta) -> np.ndarray:
        return np.exp(self.logpdf(theta))

    # log-axis geometry --------------------------------------------------

    def _log_weight(self, u: float) -> float:
        # log of t * pi(t) at t = e^u, without the normalising constant
        return self.lam * u - 0.5 * (self.chi * math.exp(-u) + self.psi * math.exp(u))

    def log_axis_mode(self) -> float:
        lam, chi, psi = self.lam, self.chi, self.psi
        if self.branch == "gamma":
            return math.log(2.0 * lam / psi)
        if self.branch == "inverse_gamma":
            return math.log(chi / (-2.0 * lam))
        root = math.sqrt(lam * lam + chi * psi)
        mode = (lam + root) / psi if lam >= 0 else chi / (root - lam)
        return math.log(mode)

    @cached_property
    def _window(self) -> tuple[float, float, float, float]:
        u_m = self.log_axis_mode()
        curv = 0.5 * (self.chi * math.exp(-u_m) + self.psi * math.exp(u_m))
        width = 1.0 / math.sqrt(curv) if curv > 0 else 1.0
        floor = self._log_weight(u_m) - _RANGE_DROP

        def edge(direction: float) -> float:
            inside, step = u_m, width
            while True:
                cand = u_m + direction * step
                if not _LOG_THETA_MIN < cand < _LOG_THETA_MAX:
                    return min(max(cand, _LOG_THETA_MIN), _LOG_THETA_MAX)
                if self._log_weight(cand) < floor:
                    outside = cand
                    break
                inside, step = cand, 2.0 * step
            for _ in range(60):
                mid = 0.5 * (inside + outside)
                if self._log_weight(mid) >= floor:
                    inside = mid
                else:
                    outside = mid
            return outside

        return edge(-1.0), u_m, edge(1.0), width

    def log_axis_range(self) -> tuple[float, float, float, float]:
        """``(u_lo, u_mode, u_hi, width)`` of the window on ``u = ln(theta)`` holding the mass."""
        return self._window

    def expect(self, func):
        u_lo, u_m, u_hi, width = self.log_axis_range()
        offsets = np.array([-16.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0]) * width
        points = np.concatenate([[u_lo, u_hi], u_m + offsets, np.linspace(u_lo, u_hi, 9)])
        points = points[(points >= u_lo) & (points <= u_hi)]

        def integrand(u):
            theta = np.exp(u)
            weight = np.exp(self.logpdf(theta) + u)
            return np.asarray(func(theta), dtype=float) * weight

        return adaptive_integrate(integrand, points)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be at least 1")
        if self.branch == "gamma":
            return rng.gamma(self.lam, 2.0 / self.psi, size=count)
        if self.branch == "inverse_gamma":
            return (0.5 * self.chi) / rng.gamma(-self.lam, 1.0, size=count)
        dist = stats.geninvgauss(self.lam, math.sqrt(self.chi * self.psi), scale=math.sqrt(self.chi / self.psi))
        return np.asarray(dist.rvs(size=count, random_state=rng), dtype=float)


@dataclass(frozen=True)
class Degenerate(MixingModel):
    """Point mass at ``theta0``; the mixture collapses to a Gaussian law."""

    theta0: float = 1.0

    def __post_init__(self):
        theta0 = float(self.theta0)
        if not (math.isfinite(theta0) and theta0 > 0):
            raise ModelValidationError(f"theta0 must be positive and finite, got {self.theta0!r}")
        object.__setattr__(self, "theta0", theta0)

    @property
    def max_finite_moment(self) -> float:
        return math.inf

    def moment(self, l: int) -> float:
        self.check_moment(l)
        return self.theta0 ** l

    def tilt(self, l: int) -> "Degenerate":
        self.check_moment(l)
        return self

    def expect(self, func):
        return np.asarray(func(np.array([self.theta0])), dtype=float)[..., 0]

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be at least 1")
        return np.full(count, self.theta0)


class Tabulated(MixingModel):
    """A mixing density frozen onto quadrature nodes.

    The law is the discrete measure placing mass ``weights[i] * values[i]`` at
    ``nodes[i]``; every expectation, moment and sample is taken under that
    measure, so analytic and simulated quantities refer to the same law. Use
    :meth:`from_density` to build the nodes from a callable.
    """

    def __init__(self, nodes, weights, values, *, tol: float = 1e-10):
        nodes = np.asarray(nodes, dtype=float)
        weights = np.asarray(weights, dtype=float)
        values = np.asarray(values, dtype=float)
        if not (nodes.ndim == 1 and nodes.shape == weights.shape == values.shape and nodes.size > 0):
            raise ModelValidationError("nodes, weights and values must be 1-D arrays of equal length")
        if np.any(nodes <= 0) or np.any(np.diff(nodes) <= 0):
            raise ModelValidationError("nodes must be positive and strictly increasing")
        if np.any(weights < 0) or np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ModelValidationError("weights and density values must be finite and non-negative")
        mass = math.fsum(weights * values)
        if abs(mass - 1.0) > tol:
            raise ModelValidationError(f"tabulated density integrates to {mass!r}, not 1 (tolerance {tol:g})")
        self.nodes = nodes
        self.weights = weights
        self.values = values
        self._masses = weights * values

    @classmethod
    def from_density(
        cls,
        density: Callable[[np.ndarray], np.ndarray],
        lower: float,
        upper: float,
        *,
        panels: int = 400,
        order: int = 20,
        tol: float = 1e-10,
    ) -> "Tabulated":
        """Tabulate ``density`` on Gauss-Legendre nodes laid out on ``ln(theta)`` over [lower, upper]."""
        if not (0 < lower < upper < math.inf):
            raise ModelValidationError("need 0 < lower < upper < inf")
        x, w = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(math.log(lower), math.log(upper), panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        u = (mid[:, None] + half[:, None] * x).ravel()
        wu = (half[:, None] * w).ravel()
        theta = np.exp(u)
        return cls(theta, wu * theta, np.asarray(density(theta), dtype=float), tol=tol)

    def __repr__(self) -> str:
        return f"Tabulated(nodes={self.nodes.size}, range=[{self.nodes[0]:.3g}, {self.nodes[-1]:.3g}])"

    @property
    def max_finite_moment(self) -> float:
        return math.inf

    def moment(self, l: int) -> float:
        self.check_moment(l)
        return math.fsum(self._masses * self.nodes ** l)

    def tilt(self, l: int) -> "Tabulated":
        self.check_moment(l)
        if l == 0:
            return self
        scaled = self.values * self.nodes ** l
        return Tabulated(self.nodes, self.weights, scaled / math.fsum(self.weights * scaled))

    def pdf(self, theta) -> np.ndarray:
        return np.interp(np.asarray(theta, dtype=float), self.nodes, self.values, left=0.0, right=0.0)

    def expect(self, func):
        return (np.asarray(func(self.nodes), dtype=float) * self._masses).sum(axis=-1)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be at least 1")
        p = self._masses / self._masses.sum()
        return self.nodes[rng.choice(self.nodes.size, size=count, p=p)]


def mixing_moment(model: MixingModel, l: int) -> float:
    """``E[Theta^l]``; raises :class:`MomentNotFinite` beyond the last finite moment."""
    return model.moment(l)


def tilt(model: MixingModel, l: int) -> MixingModel:
    """Size-biased law with density proportional to ``t^l pi(t)``."""
    return model.tilt(l)


def sample_mixing(model: MixingModel, count: int, rng: np.random.Generator | int) -> np.ndarray:
    """Draw ``count`` mixing variates; an integer ``rng`` is used as a seed."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return model.sample(count, rng)


def from_spec(spec: dict) -> MixingModel:
    """Build a mixing model from its model-file mapping."""
    kind = spec.get("type")
    if kind == "gig":
        missing = [k for k in ("lambda", "chi", "psi") if k not in spec]
        if missing:
            raise ModelValidationError(f"mixing: missing field(s) {', '.join(missing)} for type 'gig'")
        return GIG(spec["lambda"], spec["chi"], spec["psi"])
    if kind == "degenerate":
        if "theta0" not in spec:
            raise ModelValidationError("mixing: missing field theta0 for type 'degenerate'")
        return Degenerate(spec["theta0"])
    raise ModelValidationError(f"mixing.type must be 'gig' or 'degenerate', got {kind!r}")


def to_spec(model: MixingModel) -> dict:
    if isinstance(model, GIG):
        return {"type": "gig", "lambda": model.lam, "chi": model.chi, "psi": model.psi}
    if isinstance(model, Degenerate):
        return {"type": "degenerate", "theta0": model.theta0}
    raise DomainError(f"{type(model).__name__} has no model-file representation")
