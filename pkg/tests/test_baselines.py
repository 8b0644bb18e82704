import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_state
from oracles import dense_graphs, feasible, min_slots_brute
from sigsdp import HeuristicKind, InvalidArgument, NetworkState, RandSolver, greedy_assign, rand_gram


def test_rank_one_signs():
    g = rand_gram(6, 1, 0).dense()
    assert set(np.unique(np.round(g, 12)).tolist()) <= {-1.0, 1.0}


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 10), st.integers(0, 1000))
def test_unit_diagonal(k, w, seed):
    np.testing.assert_allclose(np.diag(rand_gram(k, w, seed).dense()), 1.0, atol=1e-12)


def test_rand_reproducible():
    np.testing.assert_array_equal(rand_gram(5, 3, 7).factors, rand_gram(5, 3, 7).factors)
    with pytest.raises(InvalidArgument):
        rand_gram(5, 0, 0)


def test_rand_solver_width():
    state = NetworkState.from_matrices(np.zeros((4, 4)), np.zeros((4, 4)))
    assert RandSolver(beta=2.0)(state, 4).width == 6


@pytest.mark.parametrize("kind", list(HeuristicKind))
def test_edgeless_one_slot(kind):
    state = NetworkState.from_matrices(np.zeros((6, 6)), np.zeros((6, 6)))
    a = greedy_assign(state, kind, 1.0)
    assert a.z_slots == 1 and a.complete


@pytest.mark.parametrize("kind", list(HeuristicKind))
def test_complete_association_needs_k_slots(kind):
    k = 7
    q = np.ones((k, k)) - np.eye(k)
    a = greedy_assign(NetworkState.from_matrices(q, 2 * q), kind, 1.0)
    assert a.z_slots == k and a.complete


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 9), st.sampled_from(list(HeuristicKind)))
def test_heuristic_feasible_and_not_better_than_optimum(seed, k, kind):
    state = random_state(np.random.default_rng(seed), k)
    a = greedy_assign(state, kind, 1.0)
    q, s = dense_graphs(state)
    assert a.complete and feasible(q, s, a.slots, 1.0)
    assert a.z_slots >= min_slots_brute(q, s, 1.0)


def slot_by_slot(state, kind, alpha):
    """Literal description: fill slot 1 in weight order, then slot 2, ..."""
    q, s = dense_graphs(state)
    w = s.sum(axis=0) if kind is HeuristicKind.MIN_INTERFERENCE_POWER else q.sum(axis=0)
    order = np.argsort(-w, kind="stable")
    slots = np.full(len(w), -1)
    z = 0
    while np.any(slots < 0):
        for u in order:
            if slots[u] >= 0:
                continue
            trial = slots.copy()
            trial[u] = z
            members = np.flatnonzero(trial == z)
            if q[np.ix_(members, members)].any():
                continue
            if np.any(s[np.ix_(members, members)].sum(axis=0) > alpha):
                continue
            slots[u] = z
        z += 1
    return slots


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 20), st.sampled_from(list(HeuristicKind)))
def test_first_fit_equals_slot_by_slot_filling(seed, k, kind):
    state = random_state(np.random.default_rng(seed), k)
    np.testing.assert_array_equal(greedy_assign(state, kind, 1.0).slots, slot_by_slot(state, kind, 1.0))


def test_capped_slots_may_leave_users_out():
    k = 4
    q = np.ones((k, k)) - np.eye(k)
    a = greedy_assign(NetworkState.from_matrices(q, 2 * q), HeuristicKind.MAX_ASSOCIATION, 1.0, z_slots=2)
    assert a.z_slots == 2 and a.n_unassigned == 2
