"""Compiled vs pure-Python kernels.

Times each hot kernel under both backends on identical inputs, then a full
MMW solve with each backend selected through ``SIGSDP_PURE_PYTHON`` in a
child process.  Run with ``python benchmarks/bench_kernels.py``.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np
import scipy.sparse as sp

from sigsdp import build_state, format_canonical, generate_scenario, kernels, power_profile
from sigsdp.mmw import TAYLOR_TOL

SOLVE_SNIPPET = """
import json, time
from sigsdp import MmwConfig, build_state, format_canonical, generate_scenario, kernels, power_profile, solve
sc = generate_scenario({side}, 0.0075, 0)
sdp = format_canonical(build_state(sc, power_profile(sc)), 8, 1.0)
t0 = time.perf_counter()
solve(sdp, MmwConfig(iters={iters}))
print(json.dumps({{"backend": kernels.BACKEND, "seconds": time.perf_counter() - t0}}))
"""


def best_of(fn, number, repeat=5):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def kernel_cases(side):
    sc = generate_scenario(side, 0.0075, 0)
    state = build_state(sc, power_profile(sc))
    sdp = format_canonical(state, 8, 1.0)
    pat = sdp.pattern
    rng = np.random.default_rng(0)
    k = state.n_users
    v = rng.standard_normal((k, 14))
    data = rng.standard_normal(pat.nnz)
    m = pat.matrix(data)
    m = ((m + m.T) * 0.5).tocsr()
    m.sort_indices()
    ip, ix = m.indptr.astype(np.int32), m.indices.astype(np.int32)
    q, s, st = state.assoc_matrix, state.intp_matrix, state.intp_transpose
    pref = np.argsort(rng.random((k, 8)), axis=1).astype(np.int64)
    order = np.arange(k, dtype=np.int64)

    def cases(mod):
        def fill():
            mod.fill_slots(order, pref, q.indptr, q.indices, s.indptr, s.indices, s.data,
                           st.indptr, st.indices, st.data, 1.0, np.full(k, -1, dtype=np.int64), np.zeros(k))

        def mmw_turn():
            ws = mod.MmwWorkspace(k, sdp.n_constraints, sdp.entry_con, sdp.entry_pair, sdp.entry_coef,
                                  sdp.uniform, sdp.spike_index, sdp.spike_value, pat.indptr, pat.indices,
                                  pat.pos_upper, pat.pos_lower, pat.pos_diag, sdp.pair_rows, sdp.pair_cols,
                                  TAYLOR_TOL)
            for _ in range(5):
                ws.turn(0.04)
                ws.add_loss()
                ws.sketch(v, 0.04, True)

        return {
            "sampled_gram": lambda: mod.sampled_gram(v, sdp.pair_rows, sdp.pair_cols),
            "expm_taylor_action": lambda: mod.expm_taylor_action(ip, ix, m.data, v, -0.02, 2, 10),
            "fill_slots": fill,
            "mmw_5_turns": mmw_turn,
        }

    return k, cases


def solve_in_child(side, iters, pure):
    env = dict(os.environ)
    if pure:
        env["SIGSDP_PURE_PYTHON"] = "1"
    else:
        env.pop("SIGSDP_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(side=side, iters=iters)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sides", type=int, nargs="+", default=[60, 100, 140])
    p.add_argument("--iters", type=int, default=150)
    args = p.parse_args()
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'users':>6} {'kernel':<20}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    for side in args.sides:
        k, cases = kernel_cases(side)
        timings = {b: {name: best_of(fn, 3) for name, fn in cases(mod).items()} for b, mod in backends.items()}
        for name in timings["python"]:
            row = [timings[b][name] for b in backends]
            speed = timings["python"][name] / timings["compiled"][name] if "compiled" in timings else float("nan")
            print(f"{k:>6} {name:<20}" + "".join(f"{t * 1e6:>12.1f}us" for t in row) + f"{speed:>9.1f}x")
        runs = [solve_in_child(side, args.iters, pure) for pure in (True, False)]
        speed = runs[0]["seconds"] / runs[1]["seconds"]
        print(f"{k:>6} {'full solve':<20}" + "".join(f"{r['seconds'] * 1e3:>12.1f}ms" for r in runs)
              + f"{speed:>9.1f}x   ({runs[0]['backend']} / {runs[1]['backend']})")


if __name__ == "__main__":
    main()
