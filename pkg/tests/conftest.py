import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from nmvmrisk import GIG, Degenerate, MultivariateNMVM, UnivariateNMVM, load_example_model

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# the fitted four-stock portfolio held at $25 per position
NOMINAL = (25.0, 25.0, 25.0, 25.0)


@pytest.fixture(scope="session")
def equities():
    return load_example_model()


@pytest.fixture(scope="session")
def portfolio(equities):
    return equities.reweight(NOMINAL)


@pytest.fixture(scope="session")
def gig_portfolio():
    return MultivariateNMVM(
        [0.1, -0.2, 0.0], [0.3, 0.1, -0.2], [[1, 0.3, 0.1], [0.3, 2, 0.4], [0.1, 0.4, 1.5]], GIG(1, 1, 1)
    )


@pytest.fixture(scope="session")
def gaussian_portfolio():
    return MultivariateNMVM(
        [0.1, -0.2, 0.0], [0.3, 0.1, -0.2], [[1, 0.3, 0.1], [0.3, 2, 0.4], [0.1, 0.4, 1.5]], Degenerate(1.0)
    )


@pytest.fixture
def std_normal():
    return UnivariateNMVM(0.0, 0.0, 1.0, Degenerate(1.0))


# strategies ---------------------------------------------------------------------


@st.composite
def gig_params(draw):
    """GIG parameters in the bessel branch, away from numerically silly corners."""
    lam = draw(st.floats(-3.0, 3.0))
    chi = draw(st.floats(0.05, 5.0))
    psi = draw(st.floats(0.05, 5.0))
    return GIG(lam, chi, psi)


@st.composite
def univariate_models(draw, mixing=None):
    mix = draw(mixing if mixing is not None else st.one_of(gig_params(), st.builds(Degenerate, st.floats(0.2, 3.0))))
    mu = draw(st.floats(-2.0, 2.0))
    gamma = draw(st.floats(-1.0, 1.0))
    sigma2 = draw(st.floats(0.1, 4.0))
    return UnivariateNMVM(mu, gamma, sigma2, mix)


def random_portfolio(rng: np.random.Generator, n: int | None = None, mixing=None) -> MultivariateNMVM:
    n = int(rng.integers(1, 6)) if n is None else n
    A = rng.normal(size=(n, n))
    sigma = A @ A.T / n + 0.05 * np.eye(n)
    if mixing is None:
        mixing = GIG(float(rng.uniform(-2, 2)), float(rng.uniform(0.2, 3)), float(rng.uniform(0.2, 3)))
    return MultivariateNMVM(rng.normal(scale=0.5, size=n), rng.normal(scale=0.3, size=n), sigma, mixing)


@st.composite
def portfolios(draw, max_dim: int = 4):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(1, max_dim))
    return random_portfolio(np.random.default_rng(seed), n)
