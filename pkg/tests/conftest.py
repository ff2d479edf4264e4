import numpy as np
import pytest

from ousv import (Constant, ExpClamped, SigmoidAffine, MarketParams, ModelParams,
                  OptionSpec, OUParams)

# Black-Scholes call references computed with a 40-digit independent
# implementation (mpmath normal CDF) before the pricing code was written.
BS_REF = {
    (100.0, 80.0, 0.05, 1.0, 0.2): 24.588835443927752634,
    (100.0, 100.0, 0.05, 1.0, 0.2): 10.450583572185566782,
    (100.0, 120.0, 0.05, 1.0, 0.2): 3.2474774165608136954,
}


@pytest.fixture
def ou_params():
    return OUParams(alpha=1.0, k_vol=0.5, y0=0.0)


@pytest.fixture
def exp_vol():
    return ExpClamped(a=0.2, b=1.0, lo=0.05, hi=0.6)


@pytest.fixture
def sigmoid_vol():
    return SigmoidAffine(lo=0.1, hi=0.5)


@pytest.fixture
def exp_model(ou_params, exp_vol):
    return ModelParams(MarketParams(spot=100.0, rate=0.05, drift=0.1),
                       ou_params, exp_vol)


@pytest.fixture
def const_model(ou_params):
    return ModelParams(MarketParams(spot=100.0, rate=0.05, drift=0.1),
                       ou_params, Constant(0.2))


@pytest.fixture
def atm_option():
    return OptionSpec(strike=100.0, maturity=1.0)


def assert_within_se(value, target, stderr, n_se=3.0, floor=1e-12):
    __tracebackhide__ = True
    band = n_se * max(stderr, floor)
    assert abs(value - target) <= band, \
        f"{value} not within {n_se} stderr ({stderr}) of {target}"
