"""Acceptance criteria for the full pipeline.

Each test prints a single ``PASS criterion N: ...`` or ``FAIL criterion N: ...``
line (also collected into the terminal summary) and then asserts the
verdict.  Tolerances are fixed; a red criterion stays red.
"""
import math
import time

import numpy as np
import pytest
import scipy.linalg as sla

from conftest import ACCEPTANCE_LINES
from oracles import dense_graphs, feasible, min_slots_brute
from sigsdp import (HeuristicKind, MmwConfig, MmwSolver, MobilityModel, OnlineConfig, PhyConfig, Scenario,
                    binary_search, build_state, evaluate, format_canonical, generate_scenario,
                    greedy_assign, kernels, power_profile, rand_gram, round_gram, run_online,
                    sketch_expm, slot_bounds, solve)
from sigsdp.assign import complete_randomly
from sigsdp.scenario import bs_grid
from sigsdp.simulator import framework_planner, heuristic_planner

pytestmark = pytest.mark.acceptance


def verdict(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line, flush=True)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def random_deployment(rng, side, k, phy=None):
    users = rng.uniform(0.0, side, size=(k, 2))
    return Scenario.from_positions(float(side), bs_grid(side), users, phy)


def instance(side, seed, phy=None):
    sc = generate_scenario(side, 0.0075, seed, phy)
    prof = power_profile(sc)
    return sc, prof, build_state(sc, prof)


def test_criterion_01_gap_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst, cases, ok = 0.0, 0, 0
    while cases < 20:
        k = int(rng.integers(10, 41))
        state = build_state(*(lambda s: (s, power_profile(s)))(random_deployment(rng, 60, k)))
        upper = slot_bounds(state).upper
        if upper < 2:
            continue
        z = int(rng.integers(2, upper + 1))
        eta = (0.05, 0.1)[cases % 2]
        sdp = format_canonical(state, z, 1.0)
        n_iter = math.ceil((math.log(k) + math.log(sdp.n_constraints)) / eta ** 2)
        res = solve(sdp, MmwConfig(eta=eta, iters=n_iter, exact=True))
        bound = 3 * eta * k + 1e-6
        ok += res.report.available and res.report.gap <= bound
        worst = max(worst, res.report.gap / (3 * eta * k))
        cases += 1
    elapsed = time.perf_counter() - t0
    verdict(1, ok == 20 and elapsed < 120,
            f"gap <= 3*eta*K in {ok}/20 (worst gap/(3 eta K) = {worst:.3f}), {elapsed:.1f} s")


def test_criterion_02_convergence_shape():
    t0 = time.perf_counter()
    sc, _, state = instance(100, 0)
    alpha = sc.phy.power_margin
    z = binary_search(state, MmwSolver(MmwConfig(), alpha), alpha, 0).z_slots
    res = solve(format_canonical(state, z, alpha), MmwConfig(eta=0.04, iters=150, trace_every=1))
    gap = {n: g / state.n_users for n, _, _, g in res.trace}
    rel = abs(gap[150] - gap[130]) / abs(gap[130])
    elapsed = time.perf_counter() - t0
    ok = rel < 0.05 and gap[150] < gap[10] and elapsed < 60
    verdict(2, ok, f"K={state.n_users} Z={z}: gap/K n=10 {gap[10]:.4f}, n=130 {gap[130]:.4f}, "
                   f"n=150 {gap[150]:.4f}, change 130-150 {rel:.2%}, {elapsed:.1f} s")


def test_criterion_03_bounds_bracket_optimum():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    hits, nontrivial = 0, 0
    for _ in range(100):
        k = int(rng.integers(2, 11))
        sc = random_deployment(rng, int(rng.choice([20, 40])), k)
        state = build_state(sc, power_profile(sc))
        q, s = dense_graphs(state)
        z_star = min_slots_brute(q, s, sc.phy.power_margin)
        b = slot_bounds(state)
        hits += b.lower <= z_star <= b.upper
        nontrivial += z_star > 1
    elapsed = time.perf_counter() - t0
    verdict(3, hits == 100 and elapsed < 120,
            f"lower <= Z* <= upper in {hits}/100 ({nontrivial} with Z* > 1), {elapsed:.1f} s")


def test_criterion_04_rounding_soundness():
    rng = np.random.default_rng(404)
    cfg = MmwConfig()
    clean, complete, runs = 0, 0, []
    for i in range(500):
        k = int(rng.integers(4, 31))
        sc = random_deployment(rng, int(rng.choice([40, 60])), k)
        state = build_state(sc, power_profile(sc))
        alpha = sc.phy.power_margin
        r = binary_search(state, MmwSolver(cfg, alpha), alpha, i)
        if i < 5:
            runs.append((state, alpha, i, r.assignment.slots.copy()))
        if r.assignment.complete:
            complete += 1
            q, s = dense_graphs(state)
            clean += feasible(q, s, r.assignment.slots, alpha)
    repeat = all(np.array_equal(binary_search(st, MmwSolver(cfg, a), a, i).assignment.slots, slots)
                 for st, a, i, slots in runs)
    verdict(4, clean == complete == 500 and repeat,
            f"{clean}/{complete} complete assignments pass the sweep, {complete}/500 complete, "
            f"reruns identical: {repeat}")


def explicit_constraint(q, s, kind, idx, z, alpha):
    """Unnormalised constraint matrix straight from its definition."""
    k = q.shape[0]
    eye = np.eye(k)
    if kind == "diag":
        d = np.zeros((k, k))
        d[idx, idx] = 1.0
        return d - eye / k
    if kind == "assoc":
        i, j = idx
        f = np.zeros((k, k))
        f[i, j] = f[j, i] = 0.5
        return f + eye / (k * (z - 1))
    h = np.zeros((k, k))
    h[:, idx] += (z - 1) / (2 * z) * s[:, idx]
    h[idx, :] += (z - 1) / (2 * z) * s[:, idx]
    return h - (alpha / k - s[:, idx].sum() / (k * z)) * eye


def test_criterion_05_canonical_norms():
    rng = np.random.default_rng(505)
    worst, checked = 0.0, 0
    while checked < 200:
        k = int(rng.integers(2, 51))
        sc = random_deployment(rng, int(rng.choice([40, 60, 80])), k)
        state = build_state(sc, power_profile(sc))
        z = int(rng.integers(2, 9))
        alpha = float(rng.uniform(0.25, 4.0))
        sdp = format_canonical(state, z, alpha)
        q, s = dense_graphs(state)
        c = int(rng.integers(0, sdp.n_constraints))
        n_e = state.n_assoc_edges
        if c < k:
            a = explicit_constraint(q, s, "diag", c, z, alpha)
        elif c < k + n_e:
            a = explicit_constraint(q, s, "assoc", tuple(state.assoc_edges[c - k]), z, alpha)
        else:
            a = explicit_constraint(q, s, "intp", c - k - n_e, z, alpha)
        ref = np.abs(np.linalg.eigvalsh(a)).max()
        worst = max(worst, abs(sdp.norms[c] - ref) / ref)
        checked += 1
    verdict(5, worst <= 1e-9, f"max relative error {worst:.2e} over 200 constraints")


def test_criterion_06_sketch_fidelity():
    rng = np.random.default_rng(606)
    k = 30
    sc = random_deployment(rng, 40, k)
    state = build_state(sc, power_profile(sc))
    sdp = format_canonical(state, 4, 1.0)
    y = rng.dirichlet(np.ones(sdp.n_constraints))
    eta = 0.04
    loss = 60.0 * sdp.weighted_matrix(y)           # a loss accumulated over many turns
    exact = sla.expm(-eta * loss.toarray())
    medians = []
    for width in (2, 4, 8, 16):
        errs = []
        for seed in range(50):
            w = sketch_expm(loss, eta, width, seed)
            errs.append(np.linalg.norm(w @ w.T - exact) / np.linalg.norm(exact))
        medians.append(float(np.median(errs)))
    ok = all(a > b for a, b in zip(medians, medians[1:]))
    verdict(6, ok, "median Frobenius error by width 2/4/8/16: " + ", ".join(f"{m:.4f}" for m in medians))


def test_criterion_07_linear_scaling():
    sides = (60, 80, 100, 120)
    per_side_k, per_side_t = [], []
    for side in sides:
        ks, ts = [], []
        for rep in range(5):
            sc, _, state = instance(side, rep)
            alpha = sc.phy.power_margin
            solver = MmwSolver(MmwConfig(seed=rep), alpha)
            binary_search(state, solver, alpha, rep)
            ks.append(state.n_users)
            ts.append(np.median([c["median_iteration_seconds"] for c in solver.calls]))
        per_side_k.append(np.mean(ks))
        per_side_t.append(np.median(ts))
    slope = np.polyfit(np.log(per_side_k), np.log(per_side_t), 1)[0]
    verdict(7, 0.7 <= slope <= 1.5,
            f"log-log slope {slope:.3f} ({kernels.BACKEND} kernels), K = "
            + "/".join(f"{k:.0f}" for k in per_side_k)
            + ", s/iter = " + "/".join(f"{t:.2e}" for t in per_side_t))


def test_criterion_08_bounds_pay_off():
    fewer, with_b, without_b = 0, [], []
    for seed in range(20):
        sc, _, state = instance(100, seed)
        alpha = sc.phy.power_margin
        a = binary_search(state, MmwSolver(MmwConfig(), alpha), alpha, seed, use_bounds=True)
        b = binary_search(state, MmwSolver(MmwConfig(), alpha), alpha, seed, use_bounds=False)
        fewer += a.solver_calls < b.solver_calls
        with_b.append(a.solver_calls)
        without_b.append(b.solver_calls)
    verdict(8, fewer >= 18,
            f"strictly fewer solver calls with bounds in {fewer}/20 (need 18); "
            f"mean calls {np.mean(with_b):.2f} with vs {np.mean(without_b):.2f} without")


def test_criterion_09_baseline_quality():
    fw, mintp, rand = [], [], []
    for seed in range(30):
        sc, prof, state = instance(100, seed)
        alpha = sc.phy.power_margin
        r = binary_search(state, MmwSolver(MmwConfig(), alpha), alpha, seed)
        z = r.z_slots
        fill = np.random.default_rng([seed, 9])
        fw.append(evaluate(sc, prof, r.assignment).mean_error)
        h = greedy_assign(state, HeuristicKind.MIN_INTERFERENCE_POWER, alpha, z_slots=z)
        mintp.append(evaluate(sc, prof, complete_randomly(h, fill)).mean_error)
        g = rand_gram(state.n_users, max(1, math.ceil(2 * (z - 1))), [seed, z])
        ra = round_gram(g, state, z, alpha, [seed, z, 0])
        rand.append(evaluate(sc, prof, complete_randomly(ra, fill)).mean_error)
    m_fw, m_mintp, m_rand = np.median(fw), np.median(mintp), np.median(rand)
    verdict(9, m_fw <= m_mintp and m_fw <= m_rand,
            f"median mean error framework {m_fw:.2e}, MINTP {m_mintp:.2e}, RAND {m_rand:.2e}")


def test_criterion_10_full_measurability():
    phy = PhyConfig(sensitivity_ratio=0.0)
    good = 0
    for seed in range(50):
        sc, prof, state = instance(60, seed, phy)
        r = binary_search(state, MmwSolver(MmwConfig(), phy.power_margin), phy.power_margin, seed)
        rep = evaluate(sc, prof, r.assignment)
        good += bool(np.all(rep.per_user_error <= phy.max_error_rate))
    verdict(10, good == 50, f"every user within the error target in {good}/50 instances")


def test_criterion_11_online_consistency():
    sc, prof, state = instance(100, 0)
    alpha = sc.phy.power_margin
    planner = framework_planner(alpha, MmwConfig(), 0)
    static = evaluate(sc, prof, planner(state).assignment).mean_error
    res = run_online(sc, MobilityModel.random(sc.n_users, 0.0, 0), OnlineConfig(400, 0.0, 0), planner)
    static_diff = abs(res.mean_error - static)

    medians = {}
    for speed in (0.2, 1.0):
        for name in ("framework", "mintp"):
            vals = []
            for seed in range(3):
                sc_s, _, _ = instance(100, seed)
                p = framework_planner(alpha, MmwConfig(seed=seed), seed) if name == "framework" \
                    else heuristic_planner(alpha, HeuristicKind.MIN_INTERFERENCE_POWER)
                out = run_online(sc_s, MobilityModel.random(sc_s.n_users, speed, seed),
                                 OnlineConfig(8000, None, seed), p)
                vals.append(out.mean_error)
            medians[speed, name] = float(np.median(vals))
    ok = static_diff <= 1e-12 and medians[0.2, "framework"] <= medians[0.2, "mintp"]
    verdict(11, ok,
            f"static match |diff| = {static_diff:.1e}; 0.2 m/s framework {medians[0.2, 'framework']:.2e} "
            f"vs MINTP {medians[0.2, 'mintp']:.2e}; 1.0 m/s framework {medians[1.0, 'framework']:.2e} "
            f"vs MINTP {medians[1.0, 'mintp']:.2e}")
