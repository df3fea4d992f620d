import pytest

from costshare import corpus


@pytest.fixture(scope="session")
def fl_corpus():
    return corpus.random_facility_instances(30, seed=11)


@pytest.fixture(scope="session")
def steiner_corpus():
    return corpus.random_steiner_instances(30, seed=23)


@pytest.fixture(scope="session")
def small_steiner_corpus():
    """Graphs small enough for the edge-subset brute-force oracle."""
    return corpus.random_steiner_instances(15, seed=29, max_vertices=5, max_players=4)


@pytest.fixture(scope="session")
def ssrob_corpus():
    return corpus.random_ssrob_instances(20, seed=37, max_vertices=7, max_players=4)


@pytest.fixture(scope="session")
def setcover_corpus():
    return corpus.random_setcover_instances(25, seed=51)
