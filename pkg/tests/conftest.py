import os
import sys

import pytest

# make the sibling oracle helpers importable from every test module
sys.path.insert(0, os.path.dirname(__file__))

from basishedge.engine import decompose  # noqa: E402
from basishedge.models import AdditiveModel  # noqa: E402
from basishedge.payoffs import call_claim  # noqa: E402


@pytest.fixture(scope="session")
def bs_model():
    """Correlated lognormal pair used as the basis-risk benchmark."""
    return AdditiveModel.black_scholes(
        log_drift=[0.035, 0.02875],
        vol_x=0.3,
        vol_s=0.25,
        corr=0.8,
        horizon=1.0,
        spot=[100.0, 100.0],
    )


@pytest.fixture(scope="session")
def merton_model():
    return AdditiveModel.merton(
        log_drift=[0.03, 0.025],
        vol_x=0.25,
        vol_s=0.2,
        corr=0.6,
        jump_intensity=0.7,
        jump_mean=[-0.05, -0.04],
        jump_vol_x=0.12,
        jump_vol_s=0.1,
        jump_corr=0.5,
        horizon=1.0,
        spot=[100.0, 100.0],
    )


@pytest.fixture(scope="session")
def bs_call_x(bs_model):
    """At-the-money call on the non-traded asset: the benchmark claim."""
    return decompose(bs_model, call_claim(100.0, axis=1))


@pytest.fixture(scope="session")
def merton_call_x(merton_model):
    return decompose(merton_model, call_claim(100.0, axis=1))
