import numpy as np
import pytest

from hvp.tfhe import TEST_DET, TFHE_80, NoiseSampler, gen_bootstrapping_key, gen_secret_key


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests (hours at tfhe-80)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow; pass --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def det_keys():
    rng = NoiseSampler(1234, TEST_DET)
    sk = gen_secret_key(TEST_DET, rng)
    return sk, gen_bootstrapping_key(sk, rng)


@pytest.fixture(scope="session")
def keys80():
    rng = NoiseSampler(80, TFHE_80, unsafe=True)
    sk = gen_secret_key(TFHE_80, rng)
    return sk, gen_bootstrapping_key(sk, rng)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


VERDICTS = []


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line per acceptance criterion and remember it."""

    def say(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
        VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return say


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
