"""Association / interference-power graphs and slot-count bounds."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse import linalg as spla

from .errors import InvalidArgument, NumericalFailure
from .scenario import PowerProfile, Scenario

DENSE_EIG_MAX = 16
EIG_TOL = 1e-6


def _csr(m, dtype=float):
    m = sp.csr_matrix(m, dtype=dtype)
    m.eliminate_zeros()
    m.sort_indices()
    m.indptr = m.indptr.astype(np.int32)
    m.indices = m.indices.astype(np.int32)
    return m


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Sparse network state seen by the slot-assignment solver.

    ``assoc_matrix`` (Q) links users served by the same BS;
    ``intp_matrix`` (S) holds measured interference ``S[i, j]`` from user
    ``i`` at user ``j``'s BS, normalised by the noise power.
    """

    assoc_matrix: sp.csr_matrix
    intp_matrix: sp.csr_matrix
    max_neighbors: int

    @classmethod
    def from_matrices(cls, assoc, intp) -> "NetworkState":
        q = _csr(assoc)
        s = _csr(intp)
        k = q.shape[0]
        if q.shape != (k, k) or s.shape != (k, k):
            raise InvalidArgument("Q and S must be square and of equal size")
        if (q != q.T).nnz or q.diagonal().any() or np.any((q.data != 1)):
            raise InvalidArgument("Q must be symmetric binary with zero diagonal")
        if s.diagonal().any() or np.any(s.data < 0):
            raise InvalidArgument("S must be nonnegative with zero diagonal")
        both = s.multiply(s.T)
        if q.nnz and (q.multiply(both > 0) != q).nnz:
            raise InvalidArgument("co-associated users must be mutual interferers in S")
        return cls(q, s, _max_neighbors(s))

    @property
    def n_users(self) -> int:
        return self.assoc_matrix.shape[0]

    @cached_property
    def intp_transpose(self) -> sp.csr_matrix:
        """``S.T`` in CSR form: row ``k`` lists the interferers of user ``k``."""
        return _csr(self.intp_matrix.T)

    @cached_property
    def assoc_edges(self) -> np.ndarray:
        """Association edges as an ``(E, 2)`` array with ``i < j``, sorted."""
        coo = sp.triu(self.assoc_matrix, k=1).tocoo()
        edges = np.column_stack([coo.row, coo.col]).astype(np.int64)
        return edges[np.lexsort((edges[:, 1], edges[:, 0]))] if len(edges) else edges.reshape(0, 2)

    @property
    def n_assoc_edges(self) -> int:
        return self.assoc_matrix.nnz // 2

    @property
    def n_intp_edges(self) -> int:
        return self.intp_matrix.nnz

    @cached_property
    def incoming_interference(self) -> np.ndarray:
        """Per-user total measured interference ``sum_k' S[k', k]``."""
        return np.asarray(self.intp_matrix.sum(axis=0)).ravel()


def _max_neighbors(s):
    pattern = ((s != 0) + (s != 0).T).tocsr()
    return int(np.diff(pattern.indptr).max()) if pattern.shape[0] else 0


def build_state(scenario: Scenario, profile: PowerProfile) -> NetworkState:
    """Network state from positions and powers.

    ``S[i, j] = P_i g[i, a_j] / (B N0)`` when that normalised power reaches
    the sensitivity ratio and ``i != j``; co-associated pairs get ``Q = 1``.
    """
    phy = scenario.phy
    k_users = scenario.n_users
    assoc = np.asarray(profile.assoc)
    rx = profile.tx_power[:, None] * scenario.path_gain / phy.noise_power
    measured = rx >= phy.sensitivity_ratio
    if phy.sensitivity_ratio == 0:
        measured = np.ones_like(measured)

    order = np.argsort(assoc, kind="stable")
    counts = np.bincount(assoc, minlength=scenario.n_bs)
    starts = np.concatenate([[0], np.cumsum(counts)])

    ii, aa = np.nonzero(measured)
    reps = counts[aa]
    rows = np.repeat(ii, reps)
    offs = np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps)
    cols = order[np.repeat(starts[aa], reps) + offs]
    vals = rx[rows, assoc[cols]]
    keep = rows != cols
    s = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(k_users, k_users))

    incidence = sp.csr_matrix((np.ones(k_users), (np.arange(k_users), assoc)), shape=(k_users, scenario.n_bs))
    q = (incidence @ incidence.T).tolil()
    q.setdiag(0)

    s = _csr(s)
    return NetworkState(_csr(q), s, _max_neighbors(s))


def extreme_eigenvalues(matrix, tol=EIG_TOL):
    """Smallest and largest eigenvalue of a sparse symmetric matrix.

    Small matrices go through a dense solver; larger ones through the
    implicitly restarted Lanczos iteration of ARPACK with a fixed start
    vector so results are reproducible.
    """
    n = matrix.shape[0]
    if n <= DENSE_EIG_MAX:
        w = np.linalg.eigvalsh(matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix))
        return float(w[0]), float(w[-1])
    v0 = np.random.default_rng(12345).uniform(0.5, 1.5, n)
    try:
        w = spla.eigsh(matrix, k=2, which="BE", tol=tol, v0=v0, return_eigenvectors=False,
                       maxiter=max(1000, 20 * n))
    except spla.ArpackNoConvergence as exc:
        raise NumericalFailure("Lanczos iteration did not converge",
                               {"n": n, "tol": tol, "converged": len(exc.eigenvalues)}) from exc
    return float(np.min(w)), float(np.max(w))


def smallest_eigenvalue(matrix, tol=EIG_TOL):
    n = matrix.shape[0]
    if n <= DENSE_EIG_MAX:
        return extreme_eigenvalues(matrix, tol)[0]
    v0 = np.random.default_rng(12345).uniform(0.5, 1.5, n)
    try:
        w = spla.eigsh(matrix, k=1, which="SA", tol=tol, v0=v0, return_eigenvectors=False,
                       maxiter=max(1000, 20 * n))
    except spla.ArpackNoConvergence as exc:
        raise NumericalFailure("Lanczos iteration did not converge",
                               {"n": n, "tol": tol, "converged": len(exc.eigenvalues)}) from exc
    return float(w[0])


@dataclass(frozen=True)
class SlotBounds:
    lower: int
    upper: int


def hoffman_bound(lam_min, lam_max):
    return 1.0 - lam_max / lam_min


def slot_bounds(state: NetworkState) -> SlotBounds:
    """Hoffman lower bound on the association graph and ``Omega + 1`` above."""
    k_users = state.n_users
    if k_users < 1:
        raise InvalidArgument("need at least one user")
    upper = state.max_neighbors + 1
    if state.assoc_matrix.nnz == 0:
        lower = 1
    else:
        lam_min, lam_max = extreme_eigenvalues(state.assoc_matrix)
        h = hoffman_bound(lam_min, lam_max)
        # slack matches the eigensolver tolerance so noise cannot push the ceiling up
        lower = math.ceil(h - (EIG_TOL * abs(h) + 1e-9))
    lower = max(1, min(lower, upper))
    return SlotBounds(lower, upper)


def greedy_coloring(state: NetworkState) -> np.ndarray:
    """First-fit colouring of the interference-power graph in user order.

    Neighbours in either direction get different colours, so the result
    uses at most ``Omega + 1`` colours and no measured interferer shares a
    slot with its victim.
    """
    pattern = ((state.intp_matrix != 0) + (state.intp_matrix != 0).T).tocsr()
    colors = np.full(state.n_users, -1, dtype=np.int64)
    for k in range(state.n_users):
        taken = set(colors[pattern.indices[pattern.indptr[k]:pattern.indptr[k + 1]]].tolist())
        c = 0
        while c in taken:
            c += 1
        colors[k] = c
    return colors


def coo_text(matrix) -> str:
    """Coordinate-list dump, one ``row col value`` line per nonzero."""
    coo = sp.coo_matrix(matrix)
    buf = io.StringIO()
    for r, c, v in sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())):
        buf.write(f"{r} {c} {v!r}\n")
    return buf.getvalue()


def sparsity_pattern_csv(state: NetworkState) -> str:
    """``row,col,kind`` lines for every nonzero of Q (``asso``) and S (``intp``)."""
    buf = io.StringIO()
    buf.write("row,col,kind\n")
    for kind, m in (("asso", state.assoc_matrix), ("intp", state.intp_matrix)):
        coo = m.tocoo()
        for r, c in sorted(zip(coo.row.tolist(), coo.col.tolist())):
            buf.write(f"{r},{c},{kind}\n")
    return buf.getvalue()
