import numpy as np
import pytest

import warpcap as wc


@pytest.fixture(scope="session")
def flat2():
    return wc.build("flat2")


@pytest.fixture(scope="session")
def flat3():
    return wc.build("flat3")


@pytest.fixture(scope="session")
def flat4():
    return wc.build(wc.ExampleSpec("flat", {"n": 4}))


@pytest.fixture(scope="session")
def prop26_n2():
    return wc.build("prop2_6")


@pytest.fixture(scope="session")
def prop26_n3():
    return wc.build(wc.ExampleSpec("prop2_6", {"n": 3}))


@pytest.fixture(scope="session")
def exp_warp1():
    # n = 2, rate 1: lateral area e^-r
    return wc.build(wc.ExampleSpec("exp_warp", {"lam": 1.0, "n": 2}))


@pytest.fixture(scope="session")
def staircase():
    return wc.build("staircase")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
