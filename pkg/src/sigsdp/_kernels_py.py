"""Reference implementations of the hot loops.

Same signatures and results as the compiled ``_kernels`` module; used when
the extension is not built or ``SIGSDP_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np
import scipy.sparse as sp


def sampled_gram(V, rows, cols):
    """Inner products ``<V[rows[i]], V[cols[i]]>`` for each sampled pair."""
    return np.einsum("ij,ij->i", V[rows], V[cols])


def expm_taylor_action(indptr, indices, data, W, t, n_steps, degree):
    """``exp(t * M) @ W`` by ``n_steps`` truncated Taylor steps of ``degree``.

    ``M`` is the square CSR matrix given by ``(indptr, indices, data)``.
    """
    n = len(indptr) - 1
    M = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    h = t / n_steps
    out = np.array(W, dtype=float, copy=True)
    for _ in range(n_steps):
        term = out
        acc = out.copy()
        for j in range(1, degree + 1):
            term = (h / j) * (M @ term)
            acc += term
        out = acc
    return out


def fill_slots(order, pref, q_indptr, q_indices, s_indptr, s_indices, s_data,
               st_indptr, st_indices, st_data, alpha, slots, load):
    """Greedy admission of users into slots under the integer constraints.

    Users are visited in ``order``; each tries the slots of its preference
    row (``pref[k]``, or ``pref[0]`` for every user when ``pref`` has a
    single row) and joins the first slot where no co-associated user sits
    and every member's measured interference, including its own, stays at
    or below ``alpha``.  ``S`` is passed by rows (outgoing interference,
    ``s_*``) and by columns (incoming, ``st_*``).  ``slots`` (-1 for
    unassigned) and ``load`` are updated in place; returns the number of
    users newly admitted.
    """
    order = np.asarray(order).tolist()
    shared_pref = pref.shape[0] == 1
    pref_rows = pref.tolist()
    q_indptr = q_indptr.tolist()
    q_indices = q_indices.tolist()
    s_indptr = s_indptr.tolist()
    s_indices = s_indices.tolist()
    s_data = s_data.tolist()
    st_indptr = st_indptr.tolist()
    st_indices = st_indices.tolist()
    st_data = st_data.tolist()
    admitted = 0
    for k in order:
        if slots[k] >= 0:
            continue
        for z in pref_rows[0 if shared_pref else k]:
            ok = True
            for p in range(q_indptr[k], q_indptr[k + 1]):
                if slots[q_indices[p]] == z:
                    ok = False
                    break
            if not ok:
                continue
            own = 0.0
            for p in range(st_indptr[k], st_indptr[k + 1]):
                if slots[st_indices[p]] == z:
                    own += st_data[p]
            if own > alpha:
                continue
            for p in range(s_indptr[k], s_indptr[k + 1]):
                j = s_indices[p]
                if slots[j] == z and load[j] + s_data[p] > alpha:
                    ok = False
                    break
            if not ok:
                continue
            slots[k] = z
            load[k] = own
            for p in range(s_indptr[k], s_indptr[k + 1]):
                j = s_indices[p]
                if slots[j] == z and j != k:
                    load[j] += s_data[p]
            admitted += 1
            break
    return admitted


def taylor_plan(theta, tol):
    """Substeps and degree so each step's first dropped term is below ``tol``.

    ``theta`` bounds ``|t| * ||M||`` for ``exp(t M)``.
    """
    steps = max(1, math.ceil(theta))
    h = theta / steps
    degree, bound = 0, 1.0
    while True:
        degree += 1
        bound *= h / degree
        if bound * h / (degree + 1) < tol or degree >= 60:
            return steps, degree


def gershgorin_interval(indptr, indices, data):
    """Enclosing interval of the spectrum of a square CSR matrix."""
    n = len(indptr) - 1
    rows = np.repeat(np.arange(n), np.diff(indptr))
    on = rows == indices
    d = np.bincount(rows[on], weights=data[on], minlength=n).astype(float)
    radius = np.bincount(rows[~on], weights=np.abs(data[~on]), minlength=n).astype(float)
    return float(np.min(d - radius)), float(np.max(d + radius))


class MmwWorkspace:
    """State of one MMW run over a fixed constraint layout.

    Holds the current iterate on the pattern (``diag``, ``vals``), the
    accumulated violations and losses, and the running sums behind the
    averages.  ``turn`` plays the dual side, ``add_loss`` folds the weighted
    constraints into the loss sum and ``sketch`` produces the next primal
    iterate from a random block ``V``.
    """

    def __init__(self, k, n_constraints, entry_con, entry_pair, entry_coef, uniform,
                 spike_index, spike_value, indptr, indices, pos_upper, pos_lower, pos_diag,
                 pair_rows, pair_cols, tol):
        self.k = k
        self.n_constraints = n_constraints
        self.entry_con = entry_con
        self.entry_pair = entry_pair
        self.entry_coef = entry_coef
        self.uniform = uniform
        self.spike_index = spike_index
        self.spike_value = spike_value
        self.indptr = indptr
        self.indices = indices
        self.pos_upper = pos_upper
        self.pos_lower = pos_lower
        self.pos_diag = pos_diag
        self.pair_rows = pair_rows
        self.pair_cols = pair_cols
        self.tol = tol
        n_pairs = len(pair_rows)
        self._spike = spike_index >= 0
        self.diag = np.ones(k)
        self.vals = np.zeros(n_pairs)
        self.acc = np.zeros(n_constraints)
        self.y = np.zeros(n_constraints)
        self.loss_pairs = np.zeros(n_pairs)
        self.loss_diag = np.zeros(k)
        self.xs_diag = np.zeros(k)
        self.xs_vals = np.zeros(n_pairs)
        self.ys = np.zeros(n_constraints)
        self.data = np.zeros(len(indices))

    def turn(self, eta):
        """Accumulate violations of the current iterate and update the weights."""
        v = np.bincount(self.entry_con, weights=2.0 * self.entry_coef * self.vals[self.entry_pair],
                        minlength=self.n_constraints).astype(float)
        v += self.uniform * self.diag.sum()
        m = self._spike
        v[m] += self.spike_value[m] * self.diag[self.spike_index[m]]
        self.acc += v
        e = np.exp(eta * (self.acc - self.acc.max()))
        self.y[:] = e / e.sum()
        self.xs_diag += self.diag
        self.xs_vals += self.vals
        self.ys += self.y

    def add_loss(self):
        y = self.y
        self.loss_pairs += np.bincount(self.entry_pair, weights=y[self.entry_con] * self.entry_coef,
                                       minlength=len(self.loss_pairs))
        self.loss_diag += float(y @ self.uniform)
        m = self._spike
        self.loss_diag += np.bincount(self.spike_index[m], weights=y[m] * self.spike_value[m],
                                      minlength=self.k)
        self.data[self.pos_upper] = self.loss_pairs
        self.data[self.pos_lower] = self.loss_pairs
        self.data[self.pos_diag] = self.loss_diag

    def sketch(self, V, eta, squared):
        """Next iterate from ``exp(-(eta/2) loss) V``; returns (normaliser, matvecs)."""
        t = -0.5 * eta
        lo, hi = gershgorin_interval(self.indptr, self.indices, self.data)
        mu = 0.5 * (lo + hi)
        shifted = self.data.copy()
        shifted[self.pos_diag] -= mu
        steps, degree = taylor_plan(abs(t) * 0.5 * (hi - lo), self.tol)
        W = math.exp(t * mu) * expm_taylor_action(self.indptr, self.indices, shifted, V, t, steps, degree)
        sq = np.einsum("ij,ij->i", W, W)
        norm = float(sq.sum()) if squared else float(np.sqrt(sq).sum())
        if math.isfinite(norm) and norm > 0:
            self.diag[:] = self.k * sq / norm
            self.vals[:] = (self.k / norm) * sampled_gram(W, self.pair_rows, self.pair_cols)
        return norm, steps * degree
