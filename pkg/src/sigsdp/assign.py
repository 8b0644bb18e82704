"""Rounding relaxed solutions to slot assignments, and the slot-count search."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import helmert

from . import kernels
from .canonical import GramSolution
from .errors import InvalidArgument
from .graph import NetworkState, greedy_coloring, slot_bounds

ROUNDING_RETRIES = 8


@dataclass(frozen=True)
class SimplexBasis:
    """Unit vectors ``u_1..u_Z`` in ``R^(Z-1)`` with pairwise products ``-1/(Z-1)``."""

    vectors: np.ndarray   # (Z, Z-1)

    @property
    def z_slots(self) -> int:
        return self.vectors.shape[0]


def simplex_basis(z_slots: int) -> SimplexBasis:
    if int(z_slots) != z_slots or z_slots < 2:
        raise InvalidArgument("a simplex basis needs at least two slots")
    z = int(z_slots)
    # columns of the Helmert block are centred and orthonormal up to scale
    return SimplexBasis(helmert(z).T * math.sqrt(z / (z - 1)))


def simplex_gram(basis: SimplexBasis, slots) -> GramSolution:
    """Gram factor whose row ``k`` is the simplex vector of ``slots[k]``."""
    return GramSolution(basis.vectors[np.asarray(slots, dtype=np.int64)])


@dataclass(frozen=True)
class SlotAssignment:
    """Slots are 0-based in memory, ``-1`` marks an unassigned user."""

    z_slots: int
    slots: np.ndarray

    def __post_init__(self):
        s = np.array(self.slots, dtype=np.int64)
        if s.ndim != 1 or np.any(s < -1) or np.any(s >= self.z_slots):
            raise InvalidArgument("slots must lie in [0, z_slots) or be -1")
        s.setflags(write=False)
        object.__setattr__(self, "slots", s)

    @property
    def n_users(self) -> int:
        return len(self.slots)

    @property
    def complete(self) -> bool:
        return bool(np.all(self.slots >= 0))

    @property
    def n_unassigned(self) -> int:
        return int(np.sum(self.slots < 0))

    def members(self, z: int) -> np.ndarray:
        return np.flatnonzero(self.slots == z)

    def to_dict(self, state: NetworkState | None = None, alpha: float | None = None) -> dict:
        out = {
            "z_slots": int(self.z_slots),
            "complete": self.complete,
            "slots": [int(s) + 1 if s >= 0 else None for s in self.slots],
        }
        if state is not None and alpha is not None:
            out["slack"] = (alpha - slot_loads(state, self.slots)).tolist()
        return out

    def to_json(self, state=None, alpha=None) -> str:
        return json.dumps(self.to_dict(state, alpha), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "SlotAssignment":
        return cls(int(d["z_slots"]), [s - 1 if s is not None else -1 for s in d["slots"]])


def slot_loads(state: NetworkState, slots) -> np.ndarray:
    """Measured same-slot interference at every user (0 for unassigned)."""
    slots = np.asarray(slots)
    s = state.intp_matrix.tocoo()
    same = (slots[s.row] == slots[s.col]) & (slots[s.row] >= 0)
    return np.bincount(s.col[same], weights=s.data[same], minlength=state.n_users).astype(float)


def check_constraints(state: NetworkState, assignment: SlotAssignment, alpha: float) -> dict:
    """Count association clashes and interference-budget breaches."""
    slots = assignment.slots
    q = state.assoc_matrix.tocoo()
    clash = int(np.sum((slots[q.row] == slots[q.col]) & (slots[q.row] >= 0) & (q.row < q.col)))
    over = int(np.sum(slot_loads(state, slots) > alpha))
    return {"assoc_clashes": clash, "budget_breaches": over}


def admit(state: NetworkState, pref, alpha: float, slots, load, order=None) -> int:
    """Greedy admission sweep; ``slots`` and ``load`` are updated in place."""
    if order is None:
        order = np.arange(state.n_users, dtype=np.int64)
    q, s, st = state.assoc_matrix, state.intp_matrix, state.intp_transpose
    return kernels.fill_slots(
        np.ascontiguousarray(order, dtype=np.int64), np.ascontiguousarray(pref, dtype=np.int64),
        q.indptr, q.indices, s.indptr, s.indices, s.data, st.indptr, st.indices, st.data,
        float(alpha), slots, load)


def slot_preferences(gram: GramSolution, z_slots: int, rng) -> np.ndarray:
    """Per-user slot order by descending ``<delta_z, v_k>``, ties to the lower slot."""
    delta = rng.standard_normal((z_slots, gram.width))
    delta /= np.linalg.norm(delta, axis=1, keepdims=True)
    return np.argsort(-(gram.factors @ delta.T), axis=1, kind="stable")


def round_gram(gram: GramSolution, state: NetworkState, z_slots: int, alpha: float, seed,
               initial: SlotAssignment | None = None) -> SlotAssignment:
    """Randomised rounding of a gram factor to at most ``z_slots`` slots.

    Users are processed in index order.  ``initial`` pre-seats users (its
    slots must fit in ``z_slots``); only the others are rounded.
    """
    if gram.n_users != state.n_users:
        raise InvalidArgument(f"gram has {gram.n_users} rows, expected {state.n_users}")
    if z_slots < 1:
        raise InvalidArgument("need at least one slot")
    rng = np.random.default_rng(seed)
    pref = slot_preferences(gram, z_slots, rng)
    if initial is None:
        slots = np.full(state.n_users, -1, dtype=np.int64)
    else:
        if initial.z_slots > z_slots:
            raise InvalidArgument("initial assignment uses more slots than allowed")
        slots = initial.slots.copy()
    load = slot_loads(state, slots)
    admit(state, pref, alpha, slots, load)
    return SlotAssignment(z_slots, slots)


def single_slot_feasible(state: NetworkState, alpha: float) -> bool:
    """Everyone in one slot: no association edges and every budget respected."""
    return state.assoc_matrix.nnz == 0 and bool(np.all(state.incoming_interference <= alpha))


def complete_randomly(assignment: SlotAssignment, rng) -> SlotAssignment:
    """Give unassigned users uniformly random slots."""
    slots = assignment.slots.copy()
    missing = slots < 0
    slots[missing] = rng.integers(0, assignment.z_slots, size=int(missing.sum()))
    return SlotAssignment(assignment.z_slots, slots)


Solver = Callable[[NetworkState, int], GramSolution]


@dataclass
class SearchResult:
    assignment: SlotAssignment
    gram: GramSolution | None
    z_slots: int
    solver_calls: int
    bounds: tuple
    history: list = field(default_factory=list)   # (Z, complete)
    fallback: bool = False
    round_seed: list | None = None   # seed of the rounding that produced ``assignment``


def binary_search(state: NetworkState, solver: Solver, alpha: float, seed: int = 0,
                  use_bounds: bool = True, retries: int = ROUNDING_RETRIES) -> SearchResult:
    """Smallest slot count whose rounded relaxation is complete.

    Searches ``[lower, upper]`` from ``slot_bounds`` (or ``[1, K]``).  If the
    upper end was never confirmed, it is solved with up to ``retries`` extra
    roundings and finally the greedy colouring of the interference graph.
    """
    k = state.n_users
    if use_bounds:
        b = slot_bounds(state)
        lo, hi = b.lower, b.upper
    else:
        lo, hi = 1, k
    bounds = (lo, hi)
    calls = 0
    history = []
    best = None

    def attempt(z, tries):
        nonlocal calls
        if z == 1:
            ok = single_slot_feasible(state, alpha)
            slots = np.zeros(k, dtype=np.int64) if ok else np.full(k, -1, dtype=np.int64)
            return SlotAssignment(1, slots), None, None
        gram = solver(state, z)
        calls += 1
        for r in range(tries):
            rs = [seed, z, r]
            asg = round_gram(gram, state, z, alpha, rs)
            if asg.complete:
                break
        return asg, gram, rs

    while lo < hi:
        z = (lo + hi) // 2
        found = attempt(z, 1)
        history.append((z, found[0].complete))
        if found[0].complete:
            hi = z
            best = found
        else:
            lo = z + 1

    if best is None or best[0].z_slots != lo:
        best = attempt(lo, 1 + retries)
        history.append((lo, best[0].complete))
    asg, gram, rs = best
    if asg.complete:
        return SearchResult(asg, gram, lo, calls, bounds, history, round_seed=rs)
    colors = greedy_coloring(state)
    z = int(colors.max()) + 1 if k else 1
    gram = simplex_gram(simplex_basis(z), colors) if z > 1 else None
    return SearchResult(SlotAssignment(z, colors), gram, z, calls, bounds, history, fallback=True)
