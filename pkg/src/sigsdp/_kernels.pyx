# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, ceil, sqrt, isfinite

cnp.import_array()


def sampled_gram(const double[:, ::1] V, const cnp.int64_t[::1] rows, const cnp.int64_t[::1] cols):
    cdef Py_ssize_t m = rows.shape[0], d = V.shape[1], i, c
    cdef cnp.int64_t r, q
    cdef double acc
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(m):
        r = rows[i]
        q = cols[i]
        acc = 0.0
        for c in range(d):
            acc += V[r, c] * V[q, c]
        o[i] = acc
    return out


cdef void _csr_matmat(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
                      const double[::1] data, double[:, ::1] x, double[:, ::1] y,
                      double scale) noexcept nogil:
    cdef Py_ssize_t n = indptr.shape[0] - 1, d = x.shape[1], i, p, c
    cdef cnp.int32_t j
    cdef double a
    for i in range(n):
        for c in range(d):
            y[i, c] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            a = data[p] * scale
            for c in range(d):
                y[i, c] += a * x[j, c]


def expm_taylor_action(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
                       const double[::1] data, W, double t, int n_steps, int degree):
    out = np.array(W, dtype=np.float64, order="C", copy=True)
    term_a = np.empty_like(out)
    term_b = np.empty_like(out)
    cdef double[:, ::1] o = out
    cdef double[:, ::1] ta = term_a
    cdef double[:, ::1] tb = term_b
    cdef double[:, ::1] tmp
    cdef double h = t / n_steps
    cdef Py_ssize_t n = o.shape[0], d = o.shape[1], i, c
    cdef int s, j
    with nogil:
        for s in range(n_steps):
            ta[:, :] = o
            for j in range(1, degree + 1):
                _csr_matmat(indptr, indices, data, ta, tb, h / j)
                for i in range(n):
                    for c in range(d):
                        o[i, c] += tb[i, c]
                tmp = ta
                ta = tb
                tb = tmp
    return out


def fill_slots(const cnp.int64_t[::1] order, const cnp.int64_t[:, ::1] pref,
               const cnp.int32_t[::1] q_indptr, const cnp.int32_t[::1] q_indices,
               const cnp.int32_t[::1] s_indptr, const cnp.int32_t[::1] s_indices,
               const double[::1] s_data,
               const cnp.int32_t[::1] st_indptr, const cnp.int32_t[::1] st_indices,
               const double[::1] st_data,
               double alpha, cnp.int64_t[::1] slots, double[::1] load):
    cdef Py_ssize_t oi, pi, p, n_pref = pref.shape[1]
    cdef bint shared = pref.shape[0] == 1, ok
    cdef cnp.int64_t k, z, j
    cdef double own
    cdef int admitted = 0
    with nogil:
        for oi in range(order.shape[0]):
            k = order[oi]
            if slots[k] >= 0:
                continue
            for pi in range(n_pref):
                z = pref[0, pi] if shared else pref[k, pi]
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
                        own = own + st_data[p]
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


cpdef tuple taylor_plan(double theta, double tol):
    cdef int steps = <int>ceil(theta)
    if steps < 1:
        steps = 1
    cdef double h = theta / steps, bound = 1.0
    cdef int degree = 0
    while True:
        degree += 1
        bound *= h / degree
        if bound * h / (degree + 1) < tol or degree >= 60:
            return steps, degree


def gershgorin_interval(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
                        const double[::1] data):
    cdef Py_ssize_t n = indptr.shape[0] - 1, i, p
    cdef double d, r, lo = 0.0, hi = 0.0
    for i in range(n):
        d = 0.0
        r = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            if indices[p] == i:
                d += data[p]
            else:
                r += fabs(data[p])
        if i == 0 or d - r < lo:
            lo = d - r
        if i == 0 or d + r > hi:
            hi = d + r
    return lo, hi


cdef class MmwWorkspace:
    """Compiled twin of ``_kernels_py.MmwWorkspace``."""

    cdef public Py_ssize_t k, n_constraints
    cdef public double tol
    cdef public object diag, vals, acc, y, loss_pairs, loss_diag, xs_diag, xs_vals, ys, data
    cdef object _keep, _shifted, _term_a, _term_b, _w
    cdef const cnp.int64_t[::1] entry_con, entry_pair, spike_index, pos_upper, pos_lower, pos_diag
    cdef const cnp.int64_t[::1] pair_rows, pair_cols
    cdef const double[::1] entry_coef, uniform, spike_value
    cdef const cnp.int32_t[::1] indptr, indices

    def __init__(self, k, n_constraints, entry_con, entry_pair, entry_coef, uniform,
                 spike_index, spike_value, indptr, indices, pos_upper, pos_lower, pos_diag,
                 pair_rows, pair_cols, tol):
        self.k = k
        self.n_constraints = n_constraints
        self.tol = tol
        self._keep = (entry_con, entry_pair, entry_coef, uniform, spike_index, spike_value,
                      indptr, indices, pos_upper, pos_lower, pos_diag, pair_rows, pair_cols)
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
        n_pairs = pair_rows.shape[0]
        self.diag = np.ones(k)
        self.vals = np.zeros(n_pairs)
        self.acc = np.zeros(n_constraints)
        self.y = np.zeros(n_constraints)
        self.loss_pairs = np.zeros(n_pairs)
        self.loss_diag = np.zeros(k)
        self.xs_diag = np.zeros(k)
        self.xs_vals = np.zeros(n_pairs)
        self.ys = np.zeros(n_constraints)
        self.data = np.zeros(indices.shape[0])
        self._shifted = np.zeros(indices.shape[0])
        self._w = None

    def turn(self, double eta):
        cdef double[::1] diag = self.diag, vals = self.vals, acc = self.acc, y = self.y
        cdef double[::1] xs_diag = self.xs_diag, xs_vals = self.xs_vals, ys = self.ys
        cdef Py_ssize_t c, e, i, nc = self.n_constraints
        cdef double tr = 0.0, mx, total = 0.0
        with nogil:
            for i in range(self.k):
                tr += diag[i]
            for c in range(nc):
                acc[c] += self.uniform[c] * tr
                if self.spike_index[c] >= 0:
                    acc[c] += self.spike_value[c] * diag[self.spike_index[c]]
            for e in range(self.entry_con.shape[0]):
                acc[self.entry_con[e]] += 2.0 * self.entry_coef[e] * vals[self.entry_pair[e]]
            mx = acc[0]
            for c in range(1, nc):
                if acc[c] > mx:
                    mx = acc[c]
            for c in range(nc):
                y[c] = exp(eta * (acc[c] - mx))
                total += y[c]
            for c in range(nc):
                y[c] /= total
                ys[c] += y[c]
            for i in range(self.k):
                xs_diag[i] += diag[i]
            for i in range(vals.shape[0]):
                xs_vals[i] += vals[i]

    def add_loss(self):
        cdef double[::1] y = self.y, lp = self.loss_pairs, ld = self.loss_diag, data = self.data
        cdef Py_ssize_t c, e, i
        cdef double u = 0.0
        with nogil:
            for c in range(self.n_constraints):
                u += y[c] * self.uniform[c]
                if self.spike_index[c] >= 0:
                    ld[self.spike_index[c]] += y[c] * self.spike_value[c]
            for i in range(self.k):
                ld[i] += u
                data[self.pos_diag[i]] = ld[i]
            for e in range(self.entry_con.shape[0]):
                lp[self.entry_pair[e]] += y[self.entry_con[e]] * self.entry_coef[e]
            for i in range(lp.shape[0]):
                data[self.pos_upper[i]] = lp[i]
                data[self.pos_lower[i]] = lp[i]

    def sketch(self, V, double eta, bint squared):
        cdef double t = -0.5 * eta
        lo, hi = gershgorin_interval(self.indptr, self.indices, self.data)
        cdef double mu = 0.5 * (lo + hi)
        cdef double[::1] shifted = self._shifted, data = self.data
        cdef Py_ssize_t i, c, p
        for p in range(data.shape[0]):
            shifted[p] = data[p]
        for i in range(self.k):
            shifted[self.pos_diag[i]] -= mu
        steps, degree = taylor_plan(fabs(t) * 0.5 * (hi - lo), self.tol)
        W = expm_taylor_action(self.indptr, self.indices, self._shifted, V, t, steps, degree)
        cdef double[:, ::1] w = W
        cdef double[::1] diag = self.diag, vals = self.vals
        cdef double scale = exp(t * mu), norm = 0.0, s, f
        cdef Py_ssize_t d = w.shape[1]
        cdef cnp.int64_t r, q
        for i in range(self.k):
            s = 0.0
            for c in range(d):
                s += w[i, c] * w[i, c]
            s *= scale * scale
            diag[i] = s
            norm += s if squared else sqrt(s)
        if not (isfinite(norm) and norm > 0):
            return norm, steps * degree
        f = self.k / norm
        for i in range(self.k):
            diag[i] *= f
        f *= scale * scale
        for p in range(vals.shape[0]):
            r = self.pair_rows[p]
            q = self.pair_cols[p]
            s = 0.0
            for c in range(d):
                s += w[r, c] * w[q, c]
            vals[p] = f * s
        return norm, steps * degree
