"""Brute-force Monte Carlo oracle for tail functionals of NMVM portfolios.

Draws are generated as ``mu + theta gamma + sqrt(theta) L z`` in fixed-size
chunks, each from its own stream spawned from the run seed, so a run is
reproducible bit-for-bit given ``(seed, count, chunk_size)``. Tail functionals
condition on the empirical alpha-quantile of the simulated aggregate and carry
batch-means standard errors over equal sub-batches.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .allocation import CapitalAllocator
from .errors import EmptyTail, FactorisationFailure, NumericalWarning
from .nmvm import PSD_TOL, MultivariateNMVM

DEFAULT_CHUNK = 1 << 18
N_BATCHES = 50
Z_LIMIT = 4.0
MIN_TAIL = 100


@dataclass(frozen=True)
class SampleBatch:
    draws: np.ndarray
    thetas: np.ndarray
    seed: int
    count: int

    @property
    def aggregate(self) -> np.ndarray:
        return self.draws.sum(axis=1)


@dataclass(frozen=True)
class EmpiricalTailEstimate:
    value: float
    std_error: float
    tail_count: int
    warning: str | None = None


def psd_cholesky(sigma: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L L' = sigma`` for positive semi-definite ``sigma``.

    Zero pivots (within tolerance) produce zero columns instead of failing.
    """
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    scale = max(float(np.max(np.abs(np.diag(sigma)))), 1e-300)
    tol = PSD_TOL * scale
    L = np.zeros_like(sigma)
    for j in range(n):
        d = sigma[j, j] - L[j, :j] @ L[j, :j]
        if d < -tol:
            raise FactorisationFailure(f"sigma is not positive semi-definite (pivot {j} = {d:.3g})")
        if d <= tol:
            rest = sigma[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]
            if np.any(np.abs(rest) > math.sqrt(tol * scale)):
                raise FactorisationFailure(f"sigma is not positive semi-definite at pivot {j}")
            continue
        L[j, j] = math.sqrt(d)
        L[j + 1:, j] = (sigma[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def sample_nmvm(
    model: MultivariateNMVM, count: int, seed: int, *, chunk_size: int = DEFAULT_CHUNK
) -> SampleBatch:
    """Simulate ``count`` vectors from ``model``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    L = psd_cholesky(model.sigma)
    n = model.dimension
    draws = np.empty((count, n))
    thetas = np.empty(count)
    n_chunks = -(-count // chunk_size)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    for c, ss in enumerate(streams):
        lo = c * chunk_size
        hi = min(count, lo + chunk_size)
        rng = np.random.Generator(np.random.PCG64(ss))
        theta = model.mixing.sample(hi - lo, rng)
        z = rng.standard_normal((hi - lo, n))
        draws[lo:hi] = model.mu + theta[:, None] * model.gamma + np.sqrt(theta)[:, None] * (z @ L.T)
        thetas[lo:hi] = theta
    return SampleBatch(draws, thetas, int(seed), int(count))


def write_batch_csv(batch: SampleBatch, path, labels: Sequence[str] | None = None) -> None:
    labels = list(labels) if labels else [f"x{i + 1}" for i in range(batch.draws.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*labels, "theta"])
        for row, t in zip(batch.draws, batch.thetas):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(t))])


# functionals ------------------------------------------------------------------
#
# Each functional maps the tail rows (X_tail, S_tail) of one sample to a number.


def _tm(k):
    return lambda X, S: float(np.mean(S ** k))


def _tcm(k):
    def f(X, S):
        return float(np.mean((S - S.mean()) ** k))
    return f


def _cte_alloc(i):
    return lambda X, S: float(X[:, i].mean())


def _tv_alloc(i):
    def f(X, S):
        return float(np.mean(X[:, i] * (S - S.mean())) - X[:, i].mean() * np.mean(S - S.mean()))
    return f


def _tcm_alloc(i, k):
    def f(X, S):
        d = (S - S.mean()) ** (k - 1)
        return float(np.mean(X[:, i] * d) - X[:, i].mean() * d.mean())
    return f


def _cross(i, j):
    return lambda X, S: float(np.mean(X[:, i] * X[:, j]))


def functional(name: str, *, i: int | None = None, j: int | None = None, k: int | None = None) -> Callable:
    """Tail functional by name: ``tm``, ``tcm``, ``cte_alloc``, ``tv_alloc``, ``tcm_alloc``, ``cross_moment``."""
    builders = {
        "tm": lambda: _tm(k),
        "tcm": lambda: _tcm(k),
        "cte_alloc": lambda: _cte_alloc(i),
        "tv_alloc": lambda: _tv_alloc(i),
        "tcm_alloc": lambda: _tcm_alloc(i, k),
        "cross_moment": lambda: _cross(i, j),
    }
    if name not in builders:
        raise ValueError(f"unknown functional {name!r}")
    needs = {"tm": "k", "tcm": "k", "cte_alloc": "i", "tv_alloc": "i", "tcm_alloc": "ik", "cross_moment": "ij"}
    for arg in needs[name]:
        if {"i": i, "j": j, "k": k}[arg] is None:
            raise ValueError(f"functional {name!r} needs argument {arg}")
    return builders[name]()


def _tail_rows(X: np.ndarray, S: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    n = S.size
    rank = max(1, math.ceil(alpha * n))
    threshold = np.partition(S, rank - 1)[rank - 1]
    mask = S > threshold
    if not mask.any():
        raise EmptyTail(f"no draws exceed the empirical {alpha}-quantile {threshold!r}")
    return X[mask], S[mask]


class TailSample:
    """Tail rows of the full sample and of each of ``n_batches`` consecutive sub-batches."""

    def __init__(self, batch: SampleBatch, alpha: float, n_batches: int = N_BATCHES):
        X = batch.draws
        S = batch.aggregate
        self.alpha = alpha
        self.full = _tail_rows(X, S, alpha)
        size = batch.count // n_batches
        if size < 1:
            raise ValueError(f"{batch.count} draws cannot form {n_batches} sub-batches")
        self.parts = [
            _tail_rows(X[b * size:(b + 1) * size], S[b * size:(b + 1) * size], alpha) for b in range(n_batches)
        ]

    @property
    def tail_count(self) -> int:
        return self.full[1].size

    def estimate(self, func: Callable) -> EmpiricalTailEstimate:
        value = func(*self.full)
        per_batch = np.array([func(*p) for p in self.parts])
        se = float(per_batch.std(ddof=1) / math.sqrt(per_batch.size))
        note = None
        if self.tail_count < MIN_TAIL:
            note = f"only {self.tail_count} tail draws (< {MIN_TAIL})"
            warnings.warn(note, NumericalWarning, stacklevel=2)
        return EmpiricalTailEstimate(value, se, self.tail_count, note)


def empirical_tail_functional(
    batch: SampleBatch,
    alpha: float,
    name: str,
    *,
    i: int | None = None,
    j: int | None = None,
    k: int | None = None,
    n_batches: int = N_BATCHES,
) -> EmpiricalTailEstimate:
    """Plug-in estimate of a tail functional with its batch-means standard error."""
    return TailSample(batch, alpha, n_batches).estimate(functional(name, i=i, j=j, k=k))


@dataclass(frozen=True)
class ValidationRow:
    alpha: float
    quantity: str
    analytic: float
    empirical: float
    std_error: float
    scale: float = 0.0

    @property
    def z(self) -> float:
        # floor the error at float roundoff of the functional's own magnitude, so
        # identically-zero quantities (tcm_1) do not divide noise by noise
        floor = 64 * np.finfo(float).eps * max(abs(self.analytic), abs(self.empirical), self.scale, 1e-300)
        return (self.empirical - self.analytic) / max(self.std_error, floor)

    @property
    def flagged(self) -> bool:
        return not abs(self.z) <= Z_LIMIT


def _quantities(model: MultivariateNMVM, k_max: int) -> Iterable[tuple[str, int, Callable, Callable]]:
    """``(name, degree, empirical functional, analytic functional)``; degree is the power of ``S`` involved."""
    n = model.dimension
    for k in range(1, k_max + 1):
        yield f"tm_{k}", k, functional("tm", k=k), lambda A, a, k=k: A.table(a, k).tm(k)
    for k in range(1, k_max + 1):
        yield f"tcm_{k}", k, functional("tcm", k=k), lambda A, a, k=k: A.table(a, k).tcm(k)
    for i in range(n):
        yield f"cte_alloc_{i + 1}", 1, functional("cte_alloc", i=i), lambda A, a, i=i: A.cte(a).capitals[i]
    for i in range(n):
        yield f"tv_alloc_{i + 1}", 2, functional("tv_alloc", i=i), lambda A, a, i=i: A.tv(a).capitals[i]
    for i in range(n):
        yield (
            f"tcm_alloc_{i + 1}_3", 3,
            functional("tcm_alloc", i=i, k=3),
            lambda A, a, i=i: A.tcm(a, 3).capitals[i],
        )
    for i in range(n):
        for j in range(i, n):
            yield (
                f"cross_moment_{i + 1}_{j + 1}", 2,
                functional("cross_moment", i=i, j=j),
                lambda A, a, i=i, j=j: A.cross_moment(i, j, a),
            )


def validation_report(
    model: MultivariateNMVM,
    alpha_list: Sequence[float],
    k_max: int,
    count: int,
    seed: int,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    n_batches: int = N_BATCHES,
    analytic_bias: float = 0.0,
    batch: SampleBatch | None = None,
) -> list[ValidationRow]:
    """Compare every analytic tail quantity against its Monte Carlo estimate.

    ``analytic_bias`` multiplies every analytic value by ``1 + analytic_bias``;
    it exists to check that the gate rejects wrong answers.
    """
    allocator = CapitalAllocator(model)
    if batch is None:
        batch = sample_nmvm(model, count, seed, chunk_size=chunk_size)
    rows = []
    for alpha in alpha_list:
        tail = TailSample(batch, alpha, n_batches)
        s_tail = tail.full[1]
        for name, degree, emp_func, ana_func in _quantities(model, k_max):
            est = tail.estimate(emp_func)
            analytic = float(ana_func(allocator, alpha)) * (1.0 + analytic_bias)
            scale = float(np.mean(np.abs(s_tail) ** degree))
            rows.append(ValidationRow(float(alpha), name, analytic, est.value, est.std_error, scale))
    return rows
