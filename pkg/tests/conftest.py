import numpy as np
import pytest

from srsec.model import BeamPair, NetworkInstance, SecrecyTargets
from srsec.montecarlo import ChannelProfile, sample_instance

# verdict lines appended by the acceptance module, rendered after the run
ACCEPTANCE_VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture
def t1_instance() -> NetworkInstance:
    """Hand-checkable toy: orthogonal unit channels, dead eavesdropper.

    With beams ([2, 0], [0, 1]) the combined backscatter gain is 4, the
    central user's own-message SINR is 4 / (1 + 0.5 * 4) = 4/3 and its
    secrecy rate log2(7/3).
    """
    return NetworkInstance(
        h_c=[1.0, 0.0], h_e=[0.0, 1.0], h_b=[1.0, 0.0], h_v=[0.0, 0.0],
        g_c=1.0, g_e=0.0, g_v=0.0, alpha=0.5, sigma2=1.0, P=5.0)


@pytest.fixture
def t1_beams() -> BeamPair:
    return BeamPair([2.0, 0.0], [0.0, 1.0])


@pytest.fixture
def default_targets() -> SecrecyTargets:
    return SecrecyTargets(1.0, 0.1, 0.1)


@pytest.fixture
def profile() -> ChannelProfile:
    return ChannelProfile()


def random_instance(seed, **overrides) -> NetworkInstance:
    """One draw from the default profile, with optional field overrides."""
    inst = sample_instance(ChannelProfile(), seed)
    if not overrides:
        return inst
    fields = dict(h_c=inst.h_c, h_e=inst.h_e, h_b=inst.h_b, h_v=inst.h_v,
                  g_c=inst.g_c, g_e=inst.g_e, g_v=inst.g_v,
                  alpha=inst.alpha, sigma2=inst.sigma2, P=inst.P)
    fields.update(overrides)
    return NetworkInstance(**fields)


def random_beams(inst: NetworkInstance, seed, power_frac: float = 1.0) -> BeamPair:
    """Random beam pair spending ``power_frac`` of the budget."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((2, inst.M)) + 1j * rng.standard_normal((2, inst.M))
    w *= np.sqrt(power_frac * inst.P / np.sum(np.abs(w) ** 2))
    return BeamPair(w[0], w[1])
