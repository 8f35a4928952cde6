#!/usr/bin/env python3
"""Timing comparison of the compiled kernels against the numpy fallback.

Run from the repo root after an editable install:

    python3 benchmarks/bench_kernels.py [reps]

Also times one small end-to-end simulation under each implementation (the
fallback is selected with BYZOPT_FORCE_FALLBACK=1 in a subprocess).
"""

import os
import subprocess
import sys
import time
import timeit

import numpy as np


def bench_callable(fn, reps):
    best = min(timeit.repeat(fn, number=reps, repeat=3))
    return best / reps


def kernel_table(reps):
    from byzopt.kernels import _fallback as fb
    try:
        from byzopt.kernels import _core as core
    except ImportError:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return
    rng = np.random.default_rng(0)
    n, deg, q = 16, 6, 32
    x = rng.standard_normal(n)
    v = rng.standard_normal((deg, n))
    table = rng.standard_normal((q, n))
    avg = table.mean(axis=0)
    g = rng.standard_normal(n)
    row = rng.standard_normal(n)

    cases = [
        ("soft_threshold(n=16)", lambda im: (lambda: im.soft_threshold(x, 0.3))),
        ("penalty_sum a=1 (deg=6)", lambda im: (lambda: im.penalty_direction_sum(x, v, 1))),
        ("penalty_sum a=2 (deg=6)", lambda im: (lambda: im.penalty_direction_sum(x, v, 2))),
        ("saga_update(q=32)", lambda im: (lambda: im.saga_update(table, avg, g, 2))),
        ("lasso_grad(n=16)", lambda im: (lambda: im.lasso_component_grad(row, 0.5, 0.1, x))),
    ]
    print(f"{'kernel':<26} {'compiled':>12} {'fallback':>12} {'speedup':>9}")
    for name, make in cases:
        tc = bench_callable(make(core), reps)
        tf = bench_callable(make(fb), reps)
        print(f"{name:<26} {tc * 1e6:>10.2f}us {tf * 1e6:>10.2f}us {tf / tc:>8.1f}x")


SIM_SNIPPET = r"""
import time
import numpy as np
from byzopt import engine, kernels, objective as ob, topology as tp
from byzopt.aggregators import AggregatorKind
from byzopt.attacks import AttackSpec

t = tp.gen_erdos_renyi(10, 0.5, 2, seed=42)
p = ob.make_synthetic_lasso(10, 8, 16, seed=7, beta1=0.5, beta2=0.02, row_scale=0.4)
xs = ob.solve_centralized(p, sorted(t.reliable), tol=1e-10)
cfg = engine.RunConfig(topology=t, problem=p, estimator="saga",
                       aggregator=AggregatorKind("penalty"),
                       attack=AttackSpec(kind="zero_sum", seed=1),
                       schedule=engine.Schedule("auto_constant"), phi=0.4,
                       iterations=3000, record_every=1000, master_seed=1, x_star=xs)
start = time.perf_counter()
engine.run(cfg)
print(f"{kernels.IMPL}: 3000 iterations x 10 agents in "
      f"{time.perf_counter() - start:.2f}s")
"""


def simulation_comparison():
    here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    for force in ("0", "1"):
        env = dict(os.environ, BYZOPT_FORCE_FALLBACK=force)
        subprocess.run([sys.executable, "-c", SIM_SNIPPET], env=env, cwd=here, check=True)


if __name__ == "__main__":
    reps = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
    kernel_table(reps)
    print()
    simulation_comparison()
