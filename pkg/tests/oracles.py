"""Independent reference computations used by the test suite.

Nothing here goes through the package's tilting machinery or its Bessel code.
Conditional tail functionals are integrated directly over the mixing variable:
given ``Theta = t`` the aggregate ``S`` is Gaussian, each component regresses on
``S`` with a slope that does not depend on ``t``, and Gaussian partial moments
``E[S^k 1{S > s} | t]`` are integrated against the mixing density with
``scipy.integrate.quad`` on ``u = ln t``.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np
from scipy import integrate, optimize, special, stats


# special functions -------------------------------------------------------------


def bessel_k_log_integral(order: float, z: float, dps: int = 40) -> float:
    """``ln K_order(z)`` from ``K_v(z) = int_0^inf exp(-z cosh t) cosh(v t) dt`` by mpmath quadrature.

    This is the substitution ``x = e^t`` of ``1/2 int_0^inf x^(v-1) exp(-z (1/x + x) / 2) dx``.
    """
    with mp.workdps(dps):
        nu, zz = abs(mp.mpf(order)), mp.mpf(z)
        f = lambda t: mp.exp(-zz * (mp.cosh(t) - 1)) * mp.cosh(nu * t)
        peak = mp.asinh(nu / zz)
        width = 1 / mp.sqrt(zz * mp.cosh(peak) + 1)
        # beyond this point the integrand is below exp(-400) of its peak
        end = peak + mp.acosh(1 + 400 / zz) + 2
        pts = sorted(set(mp.linspace(0, end, 21)) | {peak + k * width for k in range(-8, 9) if 0 < peak + k * width < end})
        return float(mp.log(mp.quad(f, pts)) - zz)


def bessel_k_integral(order: float, z: float, dps: int = 40) -> float:
    return math.exp(bessel_k_log_integral(order, z, dps))


def normal_quantile_bisection(p: float) -> float:
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * math.erfc(-mid / math.sqrt(2)) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def normal_tail(mean: float, var: float, alpha: float) -> dict:
    """CTE, TM2 and TV of ``N(mean, var)`` above its alpha-quantile from the truncated-normal formulas."""
    sd = math.sqrt(var)
    z = normal_quantile_bisection(alpha)
    lam = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) / (1 - alpha)
    cte = mean + sd * lam
    tv = var * (1 + z * lam - lam * lam)
    return {"s": mean + sd * z, "cte": cte, "tm2": tv + cte * cte, "tv": tv}


# mixing densities ----------------------------------------------------------------


def gig_density(lam: float, chi: float, psi: float):
    """Frozen scipy GIG law (density proportional to t^(lam-1) exp(-(chi/t + psi t)/2))."""
    if chi > 0 and psi > 0:
        return stats.geninvgauss(lam, math.sqrt(chi * psi), scale=math.sqrt(chi / psi))
    if chi == 0:
        return stats.gamma(lam, scale=2.0 / psi)
    return stats.invgamma(-lam, scale=chi / 2.0)


def mixing_moment_quadrature(lam: float, chi: float, psi: float, l: int, dps: int = 30) -> float:
    """``E[Theta^l]`` as a ratio of unnormalised mpmath integrals."""
    with mp.workdps(dps):
        L, C, P = mp.mpf(lam), mp.mpf(chi), mp.mpf(psi)
        f = lambda t, p: t ** (L - 1 + p) * mp.exp(-(C / t + P * t) / 2)
        mode = ((L - 1) + mp.sqrt((L - 1) ** 2 + C * P)) / P if P > 0 else C / (2 * (1 - L))
        pts = [0, mode / 100, mode / 10, mode, 10 * mode, 100 * mode, mp.inf]
        return float(mp.quad(lambda t: f(t, l), pts) / mp.quad(lambda t: f(t, 0), pts))


# direct tail functionals ------------------------------------------------------------


def _gaussian_partials(m: float, v: float, s: float, K: int) -> list[float]:
    """``E[Y^k 1{Y > s}]`` for ``Y ~ N(m, v)``, k = 0..K, by integration by parts."""
    sd = math.sqrt(v)
    x = (s - m) / sd
    sf = 0.5 * special.erfc(x / math.sqrt(2))
    dens = math.exp(-0.5 * x * x) / (math.sqrt(2 * math.pi) * sd)
    out = [sf]
    for k in range(1, K + 1):
        val = m * out[k - 1] + v * s ** (k - 1) * dens
        if k >= 2:
            val += (k - 1) * v * out[k - 2]
        out.append(val)
    return out


class DirectModel:
    """Conditional tail functionals of a multivariate NMVM by direct quadrature over theta."""

    def __init__(self, mu, gamma, sigma, density=None, theta0: float | None = None):
        self.mu = np.asarray(mu, float)
        self.gamma = np.asarray(gamma, float)
        self.sigma = np.asarray(sigma, float)
        self.density = density
        self.theta0 = theta0
        self.mS = float(self.mu.sum())
        self.gS = float(self.gamma.sum())
        self.vS = float(self.sigma.sum())
        self.beta = self.sigma.sum(axis=1) / self.vS

    def _mix(self, func) -> float:
        """``E[func(Theta)]`` for scalar-valued ``func``."""
        if self.theta0 is not None:
            return func(self.theta0)
        dist = self.density
        g = lambda u: func(math.exp(u)) * dist.pdf(math.exp(u)) * math.exp(u)
        # keep u where t^j pi(t) t is within 150 nats of its peak for some j in 0..5
        u = np.linspace(-60.0, 60.0, 24001)
        with np.errstate(divide="ignore"):
            base = dist.logpdf(np.exp(u)) + u
        keep = np.zeros(u.size, dtype=bool)
        for j in range(6):
            w = base + j * u
            keep |= w > np.max(w) - 150.0
        lo, hi = u[keep][0], u[keep][-1]
        pts = np.linspace(lo, hi, 60)
        return math.fsum(
            integrate.quad(g, a, b, epsabs=0.0, epsrel=1e-12, limit=400)[0] for a, b in zip(pts[:-1], pts[1:])
        )

    def partials(self, t: float, s: float, K: int) -> list[float]:
        return _gaussian_partials(self.mS + t * self.gS, t * self.vS, s, K)

    def survival(self, s: float) -> float:
        return self._mix(lambda t: self.partials(t, s, 0)[0])

    def quantile(self, alpha: float) -> float:
        centre = self.mS + self._mix(lambda t: t) * self.gS if self.theta0 is None else self.mS + self.theta0 * self.gS
        lo, hi = centre - 1.0, centre + 1.0
        while self.survival(lo) < 1 - alpha:
            lo = centre - 2 * (centre - lo)
        while self.survival(hi) > 1 - alpha:
            hi = centre + 2 * (hi - centre)
        return optimize.brentq(lambda s: self.survival(s) - (1 - alpha), lo, hi, xtol=1e-14, rtol=1e-15)

    def tail_expectation(self, s: float, alpha: float, func_of_partials) -> float:
        """``E[g | S > s]`` where ``func_of_partials(t, P)`` returns ``E[g 1{S>s} | t]`` from the partials P."""
        return self._mix(lambda t: func_of_partials(t, self.partials(t, s, 4))) / (1 - alpha)

    # named functionals --------------------------------------------------------

    def tm(self, s, alpha, k):
        return self.tail_expectation(s, alpha, lambda t, P: P[k])

    def component_mean(self, s, alpha, i):
        # E[X_i | S, t] = a_i(t) + beta_i S with a_i(t) = m_i(t) - beta_i m_S(t)
        def f(t, P):
            a = self.mu[i] + t * self.gamma[i] - self.beta[i] * (self.mS + t * self.gS)
            return a * P[0] + self.beta[i] * P[1]
        return self.tail_expectation(s, alpha, f)

    def component_times_power(self, s, alpha, i, k):
        """``E[X_i S^k | S > s]``."""
        def f(t, P):
            a = self.mu[i] + t * self.gamma[i] - self.beta[i] * (self.mS + t * self.gS)
            return a * P[k] + self.beta[i] * P[k + 1]
        return self.tail_expectation(s, alpha, f)

    def cross(self, s, alpha, i, j):
        """``E[X_i X_j | S > s]``."""
        def f(t, P):
            ai = self.mu[i] + t * self.gamma[i] - self.beta[i] * (self.mS + t * self.gS)
            aj = self.mu[j] + t * self.gamma[j] - self.beta[j] * (self.mS + t * self.gS)
            resid = t * (self.sigma[i, j] - self.beta[i] * self.beta[j] * self.vS)
            bi, bj = self.beta[i], self.beta[j]
            return (resid + ai * aj) * P[0] + (ai * bj + aj * bi) * P[1] + bi * bj * P[2]
        return self.tail_expectation(s, alpha, f)

    def summary(self, alpha: float) -> dict:
        """Tail moments, TCMs, CTE/TV/TCM3 capitals and cross moments at level alpha."""
        s = self.quantile(alpha)
        tm = [1.0] + [self.tm(s, alpha, k) for k in range(1, 5)]
        cte = tm[1]
        tcm = [sum(math.comb(k, j) * tm[k - j] * (-cte) ** j for j in range(k + 1)) for k in range(5)]
        n = self.mu.size
        cte_caps = [self.component_mean(s, alpha, i) for i in range(n)]
        xs1 = [self.component_times_power(s, alpha, i, 1) for i in range(n)]
        xs2 = [self.component_times_power(s, alpha, i, 2) for i in range(n)]
        tv_caps = [xs1[i] - cte_caps[i] * cte for i in range(n)]
        # Cov(X_i, (S - CTE)^2) = E[X_i (S-c)^2] - E[X_i] TCM_2
        tcm3_caps = [
            xs2[i] - 2 * cte * xs1[i] + cte * cte * cte_caps[i] - cte_caps[i] * tcm[2] for i in range(n)
        ]
        cross = {(i, j): self.cross(s, alpha, i, j) for i in range(n) for j in range(i, n)}
        return {
            "s": s, "tm": tm, "tcm": tcm, "cte": cte_caps, "tv": tv_caps, "tcm3": tcm3_caps, "cross": cross,
        }
