"""Canonical feasibility form of the relaxed slot-assignment SDP.

Every constraint ``A_c . X <= 0`` (``||A_c|| = 1``) is kept in decomposed
form instead of as a K x K matrix::

    A_c = sum_e coef_e (E_ij + E_ji)  +  uniform_c * I  +  spike_c * E_kk

so inner products with ``X`` and weighted sums ``sum_c y_c A_c`` only touch
the sparse off-diagonal pattern, the diagonal and one scalar per
constraint.  Three families exist, in this order:

* ``diag``  (K of them):   ``X_kk <= 1``               -> ``D_k - I/K``
* ``assoc`` (|E_asso|):    ``X_ij <= -1/(Z-1)``        -> ``F_e + I/(K(Z-1))``
* ``intp``  (K of them):   interference budget of k    -> ``H_k - b_k I``
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import InvalidArgument
from .graph import NetworkState

DIAG, ASSOC, INTP = 0, 1, 2
KIND_NAMES = ("diag", "assoc", "intp")


@dataclass(frozen=True)
class GramSolution:
    """Low-rank factor of ``X = scale * factors @ factors.T``."""

    factors: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        f = np.ascontiguousarray(self.factors, dtype=float)
        if f.ndim != 2:
            raise InvalidArgument("gram factors must be a 2-D array")
        if not self.scale > 0:
            raise InvalidArgument("gram scale must be positive")
        object.__setattr__(self, "factors", f)

    @property
    def n_users(self) -> int:
        return self.factors.shape[0]

    @property
    def width(self) -> int:
        return self.factors.shape[1]

    def dense(self) -> np.ndarray:
        return self.scale * self.factors @ self.factors.T

    def trace(self) -> float:
        return float(self.scale * np.sum(self.factors ** 2))


@dataclass(frozen=True)
class ConstraintRecord:
    """One normalised constraint in decomposed form (for inspection)."""

    kind: str
    rows: np.ndarray
    cols: np.ndarray
    coefs: np.ndarray
    uniform: float
    spike_index: int
    spike_value: float
    spectral_norm: float


class SymmetricPattern:
    """Fixed CSR layout holding a symmetric pattern plus the full diagonal.

    ``fill(pair_vals, diag)`` writes values for the ``(i, j)`` pairs
    (mirrored to ``(j, i)``) and the diagonal without reallocating.
    """

    def __init__(self, n, pairs):
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        m = len(pairs)
        rows = np.concatenate([pairs[:, 0], pairs[:, 1], np.arange(n)])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0], np.arange(n)])
        perm = np.lexsort((cols, rows))
        pos = np.empty_like(perm)
        pos[perm] = np.arange(len(perm))
        self.n = n
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=n))]).astype(np.int32)
        self.indices = cols[perm].astype(np.int32)
        self.pos_upper = pos[:m]
        self.pos_lower = pos[m:2 * m]
        self.pos_diag = pos[2 * m:]

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def fill(self, pair_vals, diag, out=None):
        data = np.empty(self.nnz) if out is None else out
        data[self.pos_upper] = pair_vals
        data[self.pos_lower] = pair_vals
        data[self.pos_diag] = diag
        return data

    def matrix(self, data) -> sp.csr_matrix:
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


@dataclass(frozen=True, eq=False)
class CanonicalSdp:
    k_users: int
    z_slots: int
    alpha: float
    kinds: np.ndarray          # (C,) family code per constraint
    pairs: np.ndarray          # (P, 2) off-diagonal pattern, i < j
    entry_con: np.ndarray      # (E,) constraint of each off-diagonal entry
    entry_pair: np.ndarray     # (E,) pattern pair of each entry
    entry_coef: np.ndarray     # (E,) normalised coefficient, A_ij = A_ji = coef
    uniform: np.ndarray        # (C,) normalised multiple of the identity
    spike_index: np.ndarray    # (C,) user with an extra diagonal term, -1 if none
    spike_value: np.ndarray    # (C,)
    norms: np.ndarray          # (C,) spectral norm before normalisation

    @property
    def n_constraints(self) -> int:
        return len(self.kinds)

    @cached_property
    def pattern(self) -> SymmetricPattern:
        return SymmetricPattern(self.k_users, self.pairs)

    @cached_property
    def pair_rows(self) -> np.ndarray:
        return np.ascontiguousarray(self.pairs[:, 0])

    @cached_property
    def pair_cols(self) -> np.ndarray:
        return np.ascontiguousarray(self.pairs[:, 1])

    @cached_property
    def _spike_mask(self):
        return self.spike_index >= 0

    def record(self, c: int) -> ConstraintRecord:
        sel = self.entry_con == c
        pr = self.pairs[self.entry_pair[sel]]
        return ConstraintRecord(KIND_NAMES[self.kinds[c]], pr[:, 0].copy(), pr[:, 1].copy(),
                                self.entry_coef[sel].copy(), float(self.uniform[c]),
                                int(self.spike_index[c]), float(self.spike_value[c]), float(self.norms[c]))

    def dense(self, c: int) -> np.ndarray:
        """Materialise normalised ``A_c`` (testing and debugging only)."""
        r = self.record(c)
        a = np.zeros((self.k_users, self.k_users))
        np.add.at(a, (r.rows, r.cols), r.coefs)
        np.add.at(a, (r.cols, r.rows), r.coefs)
        a[np.diag_indices(self.k_users)] += r.uniform
        if r.spike_index >= 0:
            a[r.spike_index, r.spike_index] += r.spike_value
        return a

    def violations_from_entries(self, diag, pair_vals) -> np.ndarray:
        """``A_c . X`` for all ``c`` given ``diag(X)`` and ``X`` on the pattern.

        O(nnz + C): off-diagonal sweep, one trace for the uniform parts and
        one lookup per diagonal spike.
        """
        diag = np.asarray(diag, dtype=float)
        out = np.bincount(self.entry_con, weights=2.0 * self.entry_coef * pair_vals[self.entry_pair],
                          minlength=self.n_constraints).astype(float)
        out += self.uniform * diag.sum()
        m = self._spike_mask
        out[m] += self.spike_value[m] * diag[self.spike_index[m]]
        return out

    def weighted_sum(self, y):
        """``sum_c y_c A_c`` as ``(pair_vals, diag)`` on the pattern."""
        y = np.asarray(y, dtype=float)
        pair_vals = np.bincount(self.entry_pair, weights=y[self.entry_con] * self.entry_coef,
                                minlength=len(self.pairs)).astype(float)
        diag = np.full(self.k_users, float(y @ self.uniform))
        m = self._spike_mask
        diag += np.bincount(self.spike_index[m], weights=y[m] * self.spike_value[m], minlength=self.k_users)
        return pair_vals, diag

    def weighted_matrix(self, y) -> sp.csr_matrix:
        pair_vals, diag = self.weighted_sum(y)
        return self.pattern.matrix(self.pattern.fill(pair_vals, diag))

    def debug_text(self) -> str:
        """Coordinate-list dump of the normalised constraints."""
        buf = io.StringIO()
        buf.write("constraint kind row col value\n")
        for c in range(self.n_constraints):
            r = self.record(c)
            kind = r.kind
            for i, j, v in zip(r.rows.tolist(), r.cols.tolist(), r.coefs.tolist()):
                buf.write(f"{c} {kind} {i} {j} {v!r}\n")
            buf.write(f"{c} {kind} * * {r.uniform!r}\n")
            if r.spike_index >= 0:
                buf.write(f"{c} {kind} {r.spike_index} {r.spike_index} {r.spike_value!r}\n")
        return buf.getvalue()


def format_canonical(state: NetworkState, z_slots: int, alpha: float) -> CanonicalSdp:
    """Build the normalised constraint system for ``z_slots`` slots."""
    if int(z_slots) != z_slots or z_slots < 2:
        raise InvalidArgument("canonical form needs at least two slots")
    k = state.n_users
    if k < 2:
        raise InvalidArgument("canonical form needs at least two users")
    if not alpha > 0:
        raise InvalidArgument("alpha must be positive")
    z = int(z_slots)
    edges = state.assoc_edges
    n_e = len(edges)
    n_c = 2 * k + n_e

    st = state.intp_transpose  # row k: interferers k' and S[k', k]
    inc_rows = np.repeat(np.arange(k), np.diff(st.indptr))   # victim k
    inc_from = st.indices.astype(np.int64)                   # interferer k'
    inc_vals = st.data
    sum_in = np.bincount(inc_rows, weights=inc_vals, minlength=k)
    sumsq_in = np.bincount(inc_rows, weights=inc_vals ** 2, minlength=k)

    diag_norm = 1.0 - 1.0 / k
    assoc_norm = 1.0 / (k * (z - 1)) + 0.5
    offset = alpha / k - sum_in / (k * z)
    intp_norm = np.abs(offset) + (z - 1) / (2 * z) * np.sqrt(sumsq_in)

    # union pattern of Q and S, as sorted i < j pairs
    lo = np.concatenate([edges[:, 0], np.minimum(inc_rows, inc_from)])
    hi = np.concatenate([edges[:, 1], np.maximum(inc_rows, inc_from)])
    keys = np.unique(lo * k + hi)
    pairs = np.column_stack([keys // k, keys % k]).astype(np.int64)

    kinds = np.concatenate([np.full(k, DIAG), np.full(n_e, ASSOC), np.full(k, INTP)]).astype(np.int8)
    norms = np.concatenate([np.full(k, diag_norm), np.full(n_e, assoc_norm), intp_norm])
    uniform = np.concatenate([np.full(k, -1.0 / k), np.full(n_e, 1.0 / (k * (z - 1))), -offset]) / norms
    spike_index = np.concatenate([np.arange(k), np.full(n_e + k, -1)]).astype(np.int64)
    spike_value = np.concatenate([np.full(k, 1.0 / diag_norm), np.zeros(n_e + k)])

    assoc_con = k + np.arange(n_e)
    assoc_pair = np.searchsorted(keys, edges[:, 0] * k + edges[:, 1])
    assoc_coef = np.full(n_e, 0.5 / assoc_norm)
    intp_con = k + n_e + inc_rows
    intp_pair = np.searchsorted(keys, np.minimum(inc_rows, inc_from) * k + np.maximum(inc_rows, inc_from))
    intp_coef = (z - 1) / (2 * z) * inc_vals / intp_norm[inc_rows]

    return CanonicalSdp(
        k_users=k, z_slots=z, alpha=float(alpha), kinds=kinds, pairs=pairs,
        entry_con=np.concatenate([assoc_con, intp_con]).astype(np.int64),
        entry_pair=np.concatenate([assoc_pair, intp_pair]).astype(np.int64),
        entry_coef=np.concatenate([assoc_coef, intp_coef]),
        uniform=uniform, spike_index=spike_index, spike_value=spike_value, norms=norms,
    )


def gram_entries(sdp: CanonicalSdp, gram: GramSolution):
    """``diag(X)`` and ``X`` on the pattern for ``X = scale * F F^T``."""
    if gram.n_users != sdp.k_users:
        raise InvalidArgument(f"gram has {gram.n_users} rows, expected {sdp.k_users}")
    f = gram.factors
    diag = gram.scale * np.einsum("ij,ij->i", f, f)
    vals = gram.scale * kernels.sampled_gram(f, sdp.pair_rows, sdp.pair_cols)
    return diag, vals


def violations(sdp: CanonicalSdp, gram: GramSolution) -> np.ndarray:
    """Constraint values ``A_c . X``; positive entries are violated."""
    diag, vals = gram_entries(sdp, gram)
    return sdp.violations_from_entries(diag, vals)
