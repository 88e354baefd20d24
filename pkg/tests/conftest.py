import pytest
from hypothesis import HealthCheck, settings

from outertrack.construction import Gamma
from outertrack.game import run_game
from outertrack.matrices import FOLDING, UNFOLDING

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def folding_game():
    """Folding game at n=5 over 12 steps (shared by several modules)."""
    return run_game(5, 4, FOLDING, 12)


@pytest.fixture(scope="session")
def unfolding_game():
    return run_game(5, 4, UNFOLDING, 10)


@pytest.fixture(scope="session")
def gamma5():
    g = Gamma(5)
    G, tt = g.tagged("a_0")
    return g, G, tt
