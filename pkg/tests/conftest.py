import numpy as np
import pytest

from mvdrift.invariant import solve_invariant_full
from mvdrift.model import BetaSpec, DriftSpec


@pytest.fixture(scope="session")
def quad_spec():
    """Quadratic potential whose invariant density is standard normal."""
    return DriftSpec(j1=1, j=1, a=[0.5], theta=[], beta=BetaSpec.zero())


@pytest.fixture(scope="session")
def quad_solution(quad_spec):
    return solve_invariant_full(quad_spec)


@pytest.fixture(scope="session")
def beta1_spec():
    return DriftSpec(j1=1, j=1, a=[0.5], theta=[], beta=BetaSpec.cos_bump(1.0))


@pytest.fixture(scope="session")
def beta1_solution(beta1_spec):
    return solve_invariant_full(beta1_spec)


@pytest.fixture(scope="session")
def spec_battery():
    """Mixed collection of valid drift specifications."""
    return [
        DriftSpec(j1=1, j=1, a=[0.5], theta=[], beta=BetaSpec.zero()),
        DriftSpec(j1=1, j=1, a=[1.0], theta=[], beta=BetaSpec.zero()),
        DriftSpec(j1=1, j=2, a=[1.0, 0.3], theta=[1.2], beta=BetaSpec.zero()),
        DriftSpec(j1=2, j=2, a=[0.5, 0.1], theta=[], beta=BetaSpec.zero()),
        DriftSpec(j1=1, j=1, a=[0.75], theta=[], beta=BetaSpec.cos_bump(1.0)),
        DriftSpec(j1=1, j=2, a=[0.8, -0.15], theta=[0.8], beta=BetaSpec.sinc_power(1)),
    ]


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
