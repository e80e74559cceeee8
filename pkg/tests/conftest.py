import pytest

from mmbsim.trace import ENHANCED, EngineConfig


@pytest.fixture
def cfg():
    return EngineConfig(8, 1)


@pytest.fixture
def enh():
    return EngineConfig(8, 1, model=ENHANCED)
