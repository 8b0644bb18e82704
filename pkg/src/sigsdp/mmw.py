"""Matrix multiplicative weights solver for the canonical feasibility SDP.

Each turn the dual player re-weights constraints with a softmax of their
accumulated violations, the weighted constraint matrices form the loss,
and the primal player answers with ``K exp(-eta * sum L) / Tr(...)``.
By default that exponential is only sketched: ``exp(-eta/2 sum L) V`` for a
thin random ``V`` is formed with a truncated Taylor series over the sparse
loss, and the iterate is evaluated on the constraint pattern alone.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import linalg as spla

from . import kernels
from .canonical import CanonicalSdp, GramSolution, format_canonical, gram_entries
from .errors import InvalidArgument, NumericalFailure
from .graph import DENSE_EIG_MAX, NetworkState, smallest_eigenvalue

TAYLOR_TOL = 1e-8
EXACT_MAX_USERS = 200


@dataclass(frozen=True)
class MmwConfig:
    """Solver settings.

    ``trace_normalization`` selects how the sketched iterate ``W W^T`` is
    scaled: ``"norms"`` multiplies by ``K / sum ||w_k||`` (the default),
    ``"squared"`` by ``K / sum ||w_k||^2``, which pins the trace at exactly K.
    """

    eta: float = 0.04
    iters: int = 150
    beta: float = 2.0
    seed: int = 0
    sketch_width: int | None = None
    exact: bool = False
    trace_normalization: str = "norms"
    trace_every: int = 0

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise InvalidArgument("eta must lie in (0, 1)")
        if self.iters < 1:
            raise InvalidArgument("iters must be positive")
        if self.beta < 1.0:
            raise InvalidArgument("beta must be at least 1")
        if self.sketch_width is not None and self.sketch_width < 1:
            raise InvalidArgument("sketch_width must be at least 1")
        if self.trace_normalization not in ("squared", "norms"):
            raise InvalidArgument("trace_normalization must be 'squared' or 'norms'")

    def width_for(self, z_slots: int) -> int:
        if self.sketch_width is not None:
            return self.sketch_width
        return max(1, math.ceil(self.beta * (z_slots - 1)))


@dataclass(frozen=True)
class GapReport:
    primal_side: float
    dual_side: float
    gap: float
    available: bool = True


@dataclass
class MmwResult:
    gram: GramSolution
    report: GapReport
    trace: list = field(default_factory=list)   # (n, primal, dual, gap)
    y_bar: np.ndarray | None = None
    x_bar_diag: np.ndarray | None = None
    x_bar_pairs: np.ndarray | None = None
    stats: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.gram, self.report, self.trace))


# -- matrix exponential action ------------------------------------------------

def expm_action(indptr, indices, data, diag_pos, t, W):
    """``exp(t * M) @ W`` for a symmetric CSR matrix ``M``.

    The matrix is shifted to the centre of its Gershgorin interval first;
    the shift comes back as a scalar factor.  Returns the product and the
    number of sparse matrix-block products spent.
    """
    lo, hi = kernels.gershgorin_interval(indptr, indices, data)
    mu = 0.5 * (lo + hi)
    shifted = np.array(data, dtype=float)
    shifted[diag_pos] -= mu
    steps, degree = kernels.taylor_plan(abs(t) * 0.5 * (hi - lo), TAYLOR_TOL)
    out = kernels.expm_taylor_action(indptr, indices, shifted, W, t, steps, degree)
    return math.exp(t * mu) * out, steps * degree


def _unit_rows(rng, n, width):
    v = rng.standard_normal((n, width))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sketch_expm(loss_sum, eta, width, seed):
    """``exp(-(eta/2) loss_sum) @ V`` with ``V`` random, rows of unit norm."""
    if width < 1:
        raise InvalidArgument("sketch width must be at least 1")
    c = sp.coo_matrix(loss_sum, dtype=float)
    n = c.shape[0]
    # explicit zeros keep a stored diagonal slot in every row for the shift
    m = sp.csr_matrix((np.concatenate([c.data, np.zeros(n)]),
                       (np.concatenate([c.row, np.arange(n)]), np.concatenate([c.col, np.arange(n)]))),
                      shape=c.shape)
    m.sort_indices()
    V = _unit_rows(np.random.default_rng(seed), n, width)
    diag_pos = _diagonal_positions(m.indptr, m.indices)
    out, _ = expm_action(m.indptr.astype(np.int32), m.indices.astype(np.int32), m.data, diag_pos, -eta / 2, V)
    return out


def _diagonal_positions(indptr, indices):
    n = len(indptr) - 1
    rows = np.repeat(np.arange(n), np.diff(indptr))
    return np.flatnonzero(rows == indices)


# -- gap ------------------------------------------------------------------------

def gap_from_entries(sdp: CanonicalSdp, diag, pair_vals, y) -> GapReport:
    primal = float(np.max(sdp.violations_from_entries(diag, pair_vals)))
    try:
        lam = smallest_eigenvalue(sdp.weighted_matrix(y))
    except NumericalFailure:
        return GapReport(primal, math.nan, math.nan, available=False)
    dual = lam * sdp.k_users
    return GapReport(primal, dual, primal - dual)


def duality_gap(sdp: CanonicalSdp, gram: GramSolution, y) -> GapReport:
    """``max_c A_c . X - K * lambda_min(sum_c y_c A_c)``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (sdp.n_constraints,):
        raise InvalidArgument("dual weights must have one entry per constraint")
    diag, vals = gram_entries(sdp, gram)
    return gap_from_entries(sdp, diag, vals, y)


# -- truncated eigendecomposition of the averaged iterate -----------------------

def truncated_gram(sdp: CanonicalSdp, diag, pair_vals, width) -> GramSolution:
    """Rank-``width`` factor of the pattern-restricted averaged iterate."""
    k = sdp.k_users
    pat = sdp.pattern
    x = pat.matrix(pat.fill(pair_vals, diag))
    rank = min(width, k)
    if k <= DENSE_EIG_MAX or rank >= k - 1:
        w, u = np.linalg.eigh(x.toarray())
        w, u = w[::-1][:rank], u[:, ::-1][:, :rank]
    else:
        v0 = np.random.default_rng(12345).uniform(0.5, 1.5, k)
        try:
            w, u = spla.eigsh(x, k=rank, which="LA", v0=v0, tol=1e-8, maxiter=max(1000, 20 * k))
        except spla.ArpackNoConvergence as exc:
            raise NumericalFailure("truncated eigendecomposition did not converge",
                                   {"n": k, "rank": rank}) from exc
        order = np.argsort(w)[::-1]
        w, u = w[order], u[:, order]
    w = np.clip(w, 0.0, None)  # sparsification can leave small negative eigenvalues
    factors = u * np.sqrt(w)
    if rank < width:
        factors = np.hstack([factors, np.zeros((k, width - rank))])
    total = float(w.sum())
    scale = float(np.sum(diag)) / total if total > 0 else 1.0
    return GramSolution(factors, scale)


# -- the solver -------------------------------------------------------------------

def workspace(sdp: CanonicalSdp):
    pat = sdp.pattern
    return kernels.MmwWorkspace(
        sdp.k_users, sdp.n_constraints, sdp.entry_con, sdp.entry_pair, sdp.entry_coef, sdp.uniform,
        sdp.spike_index, sdp.spike_value, pat.indptr, pat.indices, pat.pos_upper, pat.pos_lower,
        pat.pos_diag, sdp.pair_rows, sdp.pair_cols, TAYLOR_TOL)


def solve(sdp: CanonicalSdp, cfg: MmwConfig = MmwConfig()) -> MmwResult:
    """Run ``cfg.iters`` MMW turns and factor the averaged primal iterate."""
    k = sdp.k_users
    if cfg.exact and k > EXACT_MAX_USERS:
        raise InvalidArgument(f"exact exponentials are limited to {EXACT_MAX_USERS} users")
    width = cfg.width_for(sdp.z_slots)
    eta = cfg.eta
    n_pairs = len(sdp.pairs)
    pat = sdp.pattern
    ws = workspace(sdp)          # iterate starts at X = I
    squared = cfg.trace_normalization == "squared"
    trace = []
    matvecs = 0
    t0 = time.perf_counter()
    ticks = np.empty(cfg.iters + 1)
    ticks[0] = t0

    for n in range(1, cfg.iters + 1):
        ws.turn(eta)
        if cfg.trace_every and (n % cfg.trace_every == 0 or n == cfg.iters):
            r = gap_from_entries(sdp, ws.xs_diag / n, ws.xs_vals / n, ws.ys / n)
            trace.append((n, r.primal_side, r.dual_side, r.gap))
        if n == cfg.iters:
            break
        ws.add_loss()
        if cfg.exact:
            lam, u = np.linalg.eigh(pat.matrix(ws.data).toarray())
            wts = np.exp(-eta * (lam - lam[0]))
            x = (u * (k * wts / wts.sum())) @ u.T
            ws.diag[:] = np.diag(x)
            ws.vals[:] = x[sdp.pair_rows, sdp.pair_cols]
        else:
            V = _unit_rows(np.random.default_rng([cfg.seed, n]), k, width)
            norm, spent = ws.sketch(V, eta, squared)
            matvecs += spent
            if not (math.isfinite(norm) and norm > 0):
                raise NumericalFailure("sketched exponential over/underflowed", {"iteration": n, "norm": norm})
        ticks[n] = time.perf_counter()

    if not np.all(np.isfinite(ws.acc)):
        raise NumericalFailure("non-finite accumulated violations", {"iterations": cfg.iters})
    xs_diag, xs_vals, ys = ws.xs_diag, ws.xs_vals, ws.ys
    n_done = cfg.iters
    x_diag, x_vals, y_bar = xs_diag / n_done, xs_vals / n_done, ys / n_done
    elapsed = time.perf_counter() - t0
    report = gap_from_entries(sdp, x_diag, x_vals, y_bar)
    gram = truncated_gram(sdp, x_diag, x_vals, width)
    stats = {
        "iterations": n_done,
        "width": width,
        "seconds": elapsed,
        "seconds_per_iteration": elapsed / n_done,
        # robust to scheduler noise; excludes the final turn, which has no primal update
        "median_iteration_seconds": float(np.median(np.diff(ticks[:n_done]))) if n_done > 1 else elapsed,
        "block_matvecs": matvecs,
        "touched_entries": matvecs * pat.nnz * width + n_done * (len(sdp.entry_con) + sdp.n_constraints)
        + (n_done - 1) * n_pairs * width,
        "pattern_nnz": pat.nnz,
    }
    return MmwResult(gram, report, trace, y_bar, x_diag, x_vals, stats)


class MmwSolver:
    """Callable ``(state, z_slots) -> GramSolution`` for the slot search.

    Keeps a log of every call (slot count, timing, final gap, gap trace)
    in ``calls``.
    """

    def __init__(self, cfg: MmwConfig = MmwConfig(), alpha: float = 1.0):
        self.cfg = cfg
        self.alpha = alpha
        self.calls = []

    def __call__(self, state: NetworkState, z_slots: int) -> GramSolution:
        t0 = time.perf_counter()
        sdp = format_canonical(state, z_slots, self.alpha)
        result = solve(sdp, self.cfg)
        self.calls.append({
            "z_slots": z_slots,
            "seconds": time.perf_counter() - t0,
            "seconds_per_iteration": result.stats["seconds_per_iteration"],
            "median_iteration_seconds": result.stats["median_iteration_seconds"],
            "gap": result.report.gap,
            "primal_side": result.report.primal_side,
            "trace": result.trace,
        })
        return result.gram


def trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "primal_side", "dual_side", "gap"])
    for row in trace:
        w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])
    return buf.getvalue()
