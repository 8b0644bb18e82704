"""Reference schemes: a random relaxed solution and greedy max-weight scheduling."""
from __future__ import annotations

import enum

import numpy as np

from .assign import SlotAssignment, admit
from .canonical import GramSolution
from .errors import InvalidArgument
from .graph import NetworkState


def rand_gram(k_users: int, width: int, seed) -> GramSolution:
    """Rows are independent random unit vectors, so ``X`` has a unit diagonal."""
    if width < 1:
        raise InvalidArgument("width must be at least 1")
    v = np.random.default_rng(seed).standard_normal((k_users, width))
    return GramSolution(v / np.linalg.norm(v, axis=1, keepdims=True))


class RandSolver:
    """Solver-shaped wrapper around ``rand_gram`` for the slot search."""

    def __init__(self, beta: float = 2.0, seed: int = 0):
        self.beta = beta
        self.seed = seed

    def __call__(self, state: NetworkState, z_slots: int) -> GramSolution:
        width = max(1, int(np.ceil(self.beta * (z_slots - 1))))
        return rand_gram(state.n_users, width, [self.seed, z_slots])


class HeuristicKind(enum.Enum):
    MIN_INTERFERENCE_POWER = "mintp"
    MAX_ASSOCIATION = "masso"


def heuristic_weights(state: NetworkState, kind: HeuristicKind) -> np.ndarray:
    if kind is HeuristicKind.MIN_INTERFERENCE_POWER:
        return state.incoming_interference
    return np.asarray(state.assoc_matrix.sum(axis=0), dtype=float).ravel()


def greedy_assign(state: NetworkState, kind: HeuristicKind, alpha: float,
                  z_slots: int | None = None) -> SlotAssignment:
    """Fill slot 1 with users in descending-weight order, then slot 2, ...

    Without ``z_slots`` new slots open until everyone is seated.  With it,
    at most ``z_slots`` slots are used and users that fit nowhere stay
    unassigned.
    """
    k = state.n_users
    order = np.argsort(-heuristic_weights(state, kind), kind="stable")
    cap = k if z_slots is None else int(z_slots)
    if cap < 1:
        raise InvalidArgument("need at least one slot")
    slots = np.full(k, -1, dtype=np.int64)
    # first-fit over slots in increasing order seats the same users per slot as
    # filling one slot at a time
    admit(state, np.arange(cap, dtype=np.int64)[None, :], alpha, slots, np.zeros(k), order)
    if z_slots is None:
        z_slots = int(slots.max()) + 1 if k else 1
    return SlotAssignment(z_slots, slots)

