import numpy as np
import pytest

from sigsdp import NetworkState, Scenario, build_state, generate_scenario, power_profile

# two BSs 20 m apart; users 0,1 in the first cell, 2,3 in the second.
# Users 1 and 3 sit close enough to the border to be heard by the other BS.
TWO_CELL_BS = [[10.0, 10.0], [30.0, 10.0]]
TWO_CELL_USERS = [[10.0, 10.0], [15.0, 10.0], [30.0, 10.0], [25.0, 10.0]]


@pytest.fixture(scope="session")
def two_cell_scenario():
    return Scenario.from_positions(40.0, TWO_CELL_BS, TWO_CELL_USERS)


@pytest.fixture(scope="session")
def two_cell_state(two_cell_scenario):
    return build_state(two_cell_scenario, power_profile(two_cell_scenario))


@pytest.fixture(scope="session")
def small_instance():
    sc = generate_scenario(60, 0.0075, 3)
    prof = power_profile(sc)
    return sc, prof, build_state(sc, prof)


def random_state(rng, k, p_assoc=0.3, p_intp=0.3, scale=0.8):
    """Synthetic state: symmetric Q, S nonnegative with mutual co-assoc arcs."""
    q = np.triu(rng.random((k, k)) < p_assoc, 1)
    q = (q | q.T).astype(float)
    s = np.where(rng.random((k, k)) < p_intp, rng.uniform(0.05, scale, (k, k)), 0.0)
    s = np.where(q > 0, np.maximum(s, 1.5), s)
    np.fill_diagonal(s, 0.0)
    return NetworkState.from_matrices(q, s)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
