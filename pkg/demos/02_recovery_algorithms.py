"""Recover all clusters of a synthetic dataset, five ways.

Generates a skewed synthetic dataset and runs each recovery algorithm to
natural termination with an exact same-cluster oracle, comparing query
counts, rounds, and centroid quality. The *_simplified variants are the
practical heavy-threshold versions; run_basic and run_improved follow the
published sampling thresholds literally (hence their enormous sample
counts for the same result quality).
"""

import time

import numpy as np

from samecluster import (
    OracleSession,
    RecoveryConfig,
    SynthConfig,
    generate,
    run_basic,
    run_basic_simplified,
    run_improved,
    run_improved_simplified,
    run_uniform,
)

cfg = SynthConfig(n=10_000, K=12, alpha=2.5, sigma=0.3, b=5.0, d=8, seed=4)
ps, true_centroids = generate(cfg)
sizes = np.bincount(ps.labels)[1:]
print(f"dataset: n={cfg.n}, K={cfg.K}, cluster sizes {sorted(sizes.tolist(), reverse=True)}")
print()

runners = [
    ("uniform        ", lambda s: run_uniform(ps, s, RecoveryConfig(seed=1), target=cfg.K)),
    ("basic (simpl.) ", lambda s: run_basic_simplified(ps, s, RecoveryConfig(eps=0.5, seed=1))),
    ("improved (simpl)", lambda s: run_improved_simplified(ps, s, RecoveryConfig(eps=0.5, seed=1))),
    ("basic (theory) ", lambda s: run_basic(ps, s, RecoveryConfig(eps=0.5, seed=1, draw_cap=10**10))),
    ("improved (theory)", lambda s: run_improved(ps, s, RecoveryConfig(eps=0.5, seed=1, draw_cap=10**10))),
]

print(f"{'algorithm':<18} {'recovered':>9} {'queries':>12} {'samples':>12} "
      f"{'rounds':>6} {'max err':>8} {'time':>6}")
for name, fn in runners:
    session = OracleSession(ps.labels, rng_seed=7)
    t0 = time.perf_counter()
    res = fn(session)
    dt = time.perf_counter() - t0
    errs = res.per_cluster_errors.values()
    print(f"{name:<18} {res.K_recovered:>9} {res.queries_total:>12,} "
          f"{res.samples_total:>12,} {res.rounds_total:>6} "
          f"{max(errs) if errs else float('nan'):>8.4f} {dt:>5.1f}s")

print()
print("note how the practical variants land within a couple thousand queries")
print("while the literal thresholds pay orders of magnitude more samples for")
print("tighter (but far-beyond-required) centroid accuracy.")
