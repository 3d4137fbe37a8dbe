import pytest

from phclab.cone_dynamics import ConeSolution

# (a, b) targets used throughout; (7, 9) has c below sqrt(3)/24
CONE_TARGETS = ((6, 7), (4, 5), (5, 6))


@pytest.fixture(scope="session")
def cones():
    return {ab: ConeSolution.from_period(*ab) for ab in CONE_TARGETS + ((7, 9),)}


@pytest.fixture(scope="session")
def cone67(cones):
    return cones[(6, 7)]
